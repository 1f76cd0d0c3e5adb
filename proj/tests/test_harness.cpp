#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "sparity/harness.hpp"

using namespace sparity;
namespace fs = std::filesystem;

namespace {

ExperimentSpec parse(const std::string& text) {
  std::istringstream in(text);
  return parse_spec(in);
}

std::string config_key_of(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<accepted>";
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sparity_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Spec, ShippedTwoSparseConfig) {
  const ExperimentSpec s = load_spec(fs::path(SPARITY_CONFIG_DIR) / "k2.cfg");
  EXPECT_EQ(s.d, 8);
  EXPECT_EQ(s.k, 2);
  EXPECT_EQ(s.m, 12);
  EXPECT_EQ(s.train.iterations, 25);
  EXPECT_EQ(s.train.eta, 0.1);
  EXPECT_EQ(s.train.batch_size, 64U);
  EXPECT_EQ(s.train.rho, 0.3);
  EXPECT_EQ(s.train.lambda, 1.0);
  EXPECT_EQ(s.seeds, 10);
}

TEST(Spec, ShippedConfigsLoad) {
  const ExperimentSpec k3 = load_spec(fs::path(SPARITY_CONFIG_DIR) / "k3.cfg");
  EXPECT_EQ(k3.m, 48);
  EXPECT_EQ(k3.train.batch_size, 256U);
  const ExperimentSpec k4 = load_spec(fs::path(SPARITY_CONFIG_DIR) / "k4.cfg");
  EXPECT_EQ(k4.d, 20);
  EXPECT_EQ(k4.train.rho, 3.0);
  EXPECT_EQ(k4.train.iterations, 100);
}

TEST(Spec, NamedErrors) {
  EXPECT_EQ(config_key_of("eta = -1\n"), "eta");
  EXPECT_EQ(config_key_of("colour = red\n"), "colour");
  EXPECT_EQ(config_key_of("m = twelve\n"), "m");
  EXPECT_EQ(config_key_of("m = 12.5\n"), "m");
  EXPECT_EQ(config_key_of("seeds = 0\n"), "seeds");
  EXPECT_EQ(config_key_of("d = 8\nd = 9\n"), "d");
  EXPECT_EQ(config_key_of("k = 9\n"), "k");
  EXPECT_EQ(config_key_of("rho = nan\n"), "rho");
  EXPECT_EQ(config_key_of("mode = gpu\n"), "mode");
  EXPECT_EQ(config_key_of("checks = margin, telepathy\n"), "checks");
  EXPECT_EQ(config_key_of("support = 0,0\n"), "support");
  EXPECT_EQ(config_key_of("trace = maybe\n"), "trace");
  EXPECT_EQ(config_key_of("trace_neurons = 12\n"), "trace_neurons");
  EXPECT_EQ(config_key_of("# comment only\n\n"), "<accepted>");
}

TEST(Spec, MissingFile) {
  EXPECT_THROW(load_spec("/nonexistent/spec.cfg"), ConfigError);
}

TEST(Spec, RoundTrip) {
  const ExperimentSpec s = parse(
      "name = sweep\nd = 10\nk = 3\nsupport = 7, 2, 4\nm = 20\neta = 0.07\nrho = 0.45\n"
      "eta2 = 0.0012345678901234567\nseed = 18446744073709551615\nseeds = 3\n"
      "mode = population\nchecks = margin, gradient_gap\ntrace = true\ntrace_neurons = 1,4\n"
      "second_layer_statistic = without_label\n");
  const ExperimentSpec back = parse(serialize_spec(s));
  EXPECT_EQ(back, s);
  EXPECT_EQ(serialize_spec(back), serialize_spec(s));
  EXPECT_EQ(back.task().support(), (std::vector<int>{7, 2, 4}));
}

TEST(Spec, EnvironmentSeed) {
  ::setenv("PARITY_SEED", "1234", 1);
  EXPECT_EQ(seed_from_environment(), 1234U);
  ::setenv("PARITY_SEED", "12x", 1);
  EXPECT_THROW(seed_from_environment(), ConfigError);
  ::unsetenv("PARITY_SEED");
  EXPECT_FALSE(seed_from_environment().has_value());
}

TEST(Run, UntrainedNetIsNearChance) {
  ExperimentSpec s;
  s.train.iterations = 0;
  s.seeds = 1;
  const RunReport r = run(s);
  ASSERT_EQ(r.seeds.size(), 1U);
  EXPECT_GE(r.mean_accuracy, 0.3);
  EXPECT_LE(r.mean_accuracy, 0.7);
  EXPECT_FALSE(r.std_accuracy.has_value());
  EXPECT_EQ(r.samples_per_seed, 0U);
}

TEST(Run, AggregatesAndSamples) {
  ExperimentSpec s;
  s.seeds = 3;
  s.workers = 2;
  s.checks = {Check::margin, Check::approximation_ratio};
  const RunReport r = run(s);
  ASSERT_EQ(r.seeds.size(), 3U);
  ASSERT_TRUE(r.std_accuracy.has_value());
  EXPECT_EQ(r.samples_per_seed, 64U * 25U);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(r.seeds[i].index, i);
    EXPECT_EQ(r.seeds[i].seed, run_seed(0, i));
    EXPECT_EQ(r.seeds[i].summary.samples_consumed, 64U * 25U);
    EXPECT_GE(r.seeds[i].summary.test_accuracy, 0.0);
    EXPECT_LE(r.seeds[i].summary.test_accuracy, 1.0);
    EXPECT_EQ(r.seeds[i].checks.size(), 2U);
  }
  EXPECT_FALSE(r.condition_warnings.empty());
}

TEST(Run, WorkerCountDoesNotChangeResults) {
  ExperimentSpec s;
  s.seeds = 4;
  s.workers = 1;
  const RunReport one = run(s);
  s.workers = 3;
  const RunReport three = run(s);
  EXPECT_EQ(report_json(one).size(), report_json(three).size());
  for (int i = 0; i < 4; ++i)
    EXPECT_EQ(one.seeds[i].summary.test_accuracy, three.seeds[i].summary.test_accuracy);
}

TEST(Run, FilesAreByteIdentical) {
  const fs::path a = scratch("a"), b = scratch("b");
  ExperimentSpec s;
  s.seeds = 2;
  s.trace = true;
  s.checks = {Check::sign_agreement, Check::margin};
  s.output_dir = a.string();
  run(s);
  s.output_dir = b.string();
  run(s);
  for (const char* f : {"report.json", "report.txt", "trace_seed0.csv", "trace_seed1.csv"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  const auto ja = nlohmann::json::parse(slurp(a / "report.json"));
  EXPECT_EQ(ja["schema"], 1);
  EXPECT_EQ(ja["status"], "ok");
  EXPECT_EQ(ja["seeds"].size(), 2U);
  EXPECT_EQ(slurp(a / "trace_seed0.csv").rfind("t,neuron,coord,value,kind\n", 0), 0U);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Run, FailureFlushesMarkedReport) {
  const fs::path dir = scratch("fail");
  ExperimentSpec s;
  s.d = 26;
  s.k = 2;
  s.m = 4;
  s.train.iterations = 1;
  s.checks = {Check::approximation_ratio};  // needs enumeration, d = 26 is too large
  s.output_dir = dir.string();
  EXPECT_THROW(run(s), Error);
  const auto j = nlohmann::json::parse(slurp(dir / "report.json"));
  EXPECT_EQ(j["status"], "failed");
  EXPECT_NE(j["failure"].get<std::string>().find("seed 0"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Run, MonteCarloAboveEnumerationCap) {
  ExperimentSpec s;
  s.d = 25;
  s.k = 2;
  s.m = 4;
  s.train.iterations = 2;
  s.train.batch_size = 8;
  const RunReport r = run(s);
  EXPECT_FALSE(r.seeds[0].summary.accuracy_exact);
}

TEST(Run, SecondLayerDriftCheck) {
  ExperimentSpec s;
  s.train.iterations = 100;
  s.train.eta2 = second_layer_drift_constant(2) / 400.0;
  s.checks = {Check::second_layer_drift};
  const RunReport r = run(s);
  ASSERT_EQ(r.seeds[0].checks.size(), 1U);
  EXPECT_TRUE(r.seeds[0].checks[0].passed);
}

TEST(Run, TextReportMentionsAccuracy) {
  ExperimentSpec s;
  s.seeds = 2;
  const std::string text = report_text(run(s));
  EXPECT_NE(text.find("test accuracy (exact)"), std::string::npos);
  EXPECT_NE(text.find("+-"), std::string::npos);
}

TEST(Figures, RequiresRecording) {
  ExperimentSpec s;
  EXPECT_THROW(emit_figure_traces(s, {NeuronSelector::parse("0")}), Error);
}

TEST(Figures, WritesHeaderedCsv) {
  const fs::path dir = scratch("fig");
  ExperimentSpec s;
  s.trace = true;
  s.output_dir = dir.string();
  const auto out = emit_figure_traces(s, {NeuronSelector::parse("good"), NeuronSelector::parse("bad")});
  ASSERT_EQ(out.neurons.size(), 2U);
  EXPECT_TRUE(out.neurons[0].good);
  EXPECT_FALSE(out.neurons[1].good);
  const std::string csv = slurp(out.neurons[0].path);
  EXPECT_EQ(csv.rfind("# neuron=", 0), 0U);
  EXPECT_NE(csv.find("class=good"), std::string::npos);
  EXPECT_NE(csv.find("\nt,neuron,coord,value,kind\n"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Figures, PopulationNoiseExactlyGeometric) {
  ExperimentSpec s;
  s.trace = true;
  s.mode = TrainMode::population;
  const auto out = emit_figure_traces(s, {NeuronSelector::parse("0")});
  double expected = 1.0;
  for (const auto& step : out.trace.steps()) {
    for (int j = 2; j < 8; ++j) EXPECT_EQ(std::abs(step.weights[0][j]), expected);
    expected *= 0.9;
  }
}

TEST(Figures, SelectorParsing) {
  EXPECT_EQ(NeuronSelector::parse("good").kind, NeuronSelector::Kind::first_good);
  EXPECT_EQ(NeuronSelector::parse("7").index, 7);
  EXPECT_THROW(NeuronSelector::parse("-1"), ConfigError);
  EXPECT_THROW(NeuronSelector::parse("x"), ConfigError);
}

TEST(Table3, Formatting) {
  const std::string t = format_table3({{2, 10, 99.5, 0.25, 99.69, 0.29}});
  EXPECT_NE(t.find("99.50"), std::string::npos);
  EXPECT_NE(t.find("99.69"), std::string::npos);
}

TEST(Verification, SuitePasses) {
  for (const auto& c : run_verification()) EXPECT_TRUE(c.passed) << c.name << " " << c.detail;
}
