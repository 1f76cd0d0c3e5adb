#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sparity/analysis.hpp"
#include "sparity/error.hpp"
#include "sparity/harness.hpp"
#include "sparity/oracle.hpp"

using namespace sparity;

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> seeds;
  std::string mode;
  bool second_layer = false;
  std::string out;
  std::optional<unsigned> workers;
};

void apply(ExperimentSpec& spec, const Overrides& o) {
  if (auto env = seed_from_environment()) spec.train.seed = *env;
  if (o.seed) spec.train.seed = *o.seed;
  if (o.seeds) spec.seeds = *o.seeds;
  if (!o.mode.empty()) spec.mode = parse_train_mode(o.mode);
  if (o.second_layer && spec.train.eta2 == 0.0)
    spec.train.eta2 = second_layer_drift_constant(spec.k) / (4.0 * std::max(1, spec.train.iterations));
  if (!o.out.empty()) spec.output_dir = o.out;
  if (o.workers) spec.workers = *o.workers;
  spec.validate();
}

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "master seed (overrides PARITY_SEED)");
  cmd->add_option("--seeds", o.seeds, "number of repeat seeds");
  cmd->add_option("--mode", o.mode, "stochastic or population")
      ->check(CLI::IsMember({"stochastic", "population"}));
  cmd->add_flag("--second-layer", o.second_layer, "train the second layer (eta2 = c / 4T if unset)");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--workers", o.workers, "parallel workers, 0 = all cores");
}

int print_checks(const std::vector<LemmaCheck>& checks) {
  int failed = 0;
  for (const auto& c : checks) {
    std::printf("%s  %s%s%s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(),
                c.detail.empty() ? "" : "  ", c.detail.c_str());
    failed += !c.passed;
  }
  return failed;
}

int oracle_check() {
  std::vector<LemmaCheck> checks;
  const std::pair<int, int> settings[] = {{8, 2}, {8, 3}, {10, 4}};
  for (const auto& [d, k] : settings) {
    const ParityTask task = ParityTask::canonical(d, k);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const Network net = init_uniform(8, d, k, derive_seed(d * 10 + k, StreamDomain::probe, i));
      const auto closed = population_gradient(net, task);
      const auto enumerated = exact_gradient(net, task);
      double scale = 0.0, diff = 0.0;
      for (std::size_t e = 0; e < closed.first.size(); ++e) {
        scale = std::max(scale, std::abs(enumerated.first[e]));
        diff = std::max(diff, std::abs(closed.first[e] - enumerated.first[e]));
      }
      worst = std::max(worst, scale > 0.0 ? diff / scale : diff);
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "max relative error %.3g", worst);
    checks.push_back({"closed form vs enumeration d=" + std::to_string(d) + " k=" + std::to_string(k),
                      worst <= 1e-9, 1e-9 - worst, buf});
  }
  return print_checks(checks);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sign SGD on two-layer polynomial networks for sparse parity"};
  app.require_subcommand(1);
  app.fallthrough();
  bool strict = false;
  app.add_flag("--strict", strict, "exit non-zero when a check fails");

  Overrides o;
  std::string cfg_path;

  auto* train = app.add_subcommand("train", "run an experiment config");
  train->add_option("config", cfg_path, "config file")->required()->check(CLI::ExistingFile);
  add_common(train, o);

  unsigned verify_workers = 0;
  auto* verify = app.add_subcommand("verify", "run the lemma verification suite");
  verify->add_option("--workers", verify_workers);

  auto* oracle = app.add_subcommand("oracle-check", "closed-form gradient vs enumeration");

  std::string config_dir = "configs";
  auto* table = app.add_subcommand("reproduce-table3", "run the k = 2, 3, 4 configs, 10 seeds each");
  table->add_option("--configs", config_dir, "directory holding k2.cfg, k3.cfg, k4.cfg");
  table->add_option("--out", o.out, "output directory");
  table->add_option("--workers", o.workers, "parallel workers, 0 = all cores");

  std::vector<std::string> neurons;
  auto* trace = app.add_subcommand("trace", "emit per-neuron trajectory CSVs");
  trace->add_option("config", cfg_path, "config file")->required()->check(CLI::ExistingFile);
  trace->add_option("--neuron", neurons, "index, good or bad (repeatable)")->required();
  add_common(trace, o);

  CLI11_PARSE(app, argc, argv);

  try {
    int failed = 0;
    if (*train) {
      ExperimentSpec spec = load_spec(cfg_path);
      apply(spec, o);
      const RunReport report = run(spec);
      std::cout << report_text(report);
      std::printf("  wall time: %.2f s\n", report.wall_seconds);
      failed = report.all_checks_passed() ? 0 : 1;
    } else if (*verify) {
      failed = print_checks(run_verification(verify_workers));
    } else if (*oracle) {
      failed = oracle_check();
    } else if (*table) {
      const auto rows = reproduce_table3(config_dir, o.out, o.workers.value_or(0));
      std::cout << format_table3(rows);
    } else if (*trace) {
      ExperimentSpec spec = load_spec(cfg_path);
      spec.trace = true;
      apply(spec, o);
      std::vector<NeuronSelector> selectors;
      for (const auto& n : neurons) selectors.push_back(NeuronSelector::parse(n));
      const FigureTraces traces = emit_figure_traces(spec, selectors);
      for (const auto& n : traces.neurons) {
        std::printf("neuron %d (%s)", n.neuron, n.good ? "good" : "bad");
        if (!n.path.empty()) std::printf(" -> %s", n.path.c_str());
        std::printf("\n");
      }
      if (spec.output_dir.empty())
        for (const auto& n : traces.neurons) traces.trace.write_csv(std::cout, n.neuron);
    }
    return strict && failed ? 2 : 0;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error [%s]: %s\n", e.key().c_str(), e.what());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
  }
  return 1;
}
