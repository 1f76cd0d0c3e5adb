#include "sparity/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "sparity/oracle.hpp"

namespace sparity {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Checks

namespace {

constexpr std::pair<Check, const char*> kCheckNames[] = {
    {Check::population_dynamics, "population_dynamics"},
    {Check::sign_agreement, "sign_agreement"},
    {Check::gradient_gap, "gradient_gap"},
    {Check::approximation_ratio, "approximation_ratio"},
    {Check::second_layer_drift, "second_layer_drift"},
    {Check::margin, "margin"},
};

}  // namespace

std::string to_string(Check check) {
  for (const auto& [c, name] : kCheckNames)
    if (c == check) return name;
  return "unknown";
}

Check parse_check(const std::string& text) {
  for (const auto& [c, name] : kCheckNames)
    if (text == name) return c;
  throw ConfigError("checks", "unknown check '" + text + "'");
}

// ---------------------------------------------------------------------------
// Configuration

ParityTask ExperimentSpec::task() const {
  if (support.empty()) return ParityTask::canonical(d, k);
  return ParityTask(d, support);
}

void ExperimentSpec::validate() const {
  if (d < 1) throw ConfigError("d", "must be >= 1");
  if (k < 1 || k > d) throw ConfigError("k", "must satisfy 1 <= k <= d");
  if (k > 20) throw ConfigError("k", "must be <= 20");
  if (!support.empty()) {
    if (static_cast<int>(support.size()) != k)
      throw ConfigError("support", "must list exactly k indices");
    try {
      ParityTask check(d, support);
    } catch (const Error& e) {
      throw ConfigError("support", e.what());
    }
  }
  if (m < 1) throw ConfigError("m", "must be >= 1");
  const TrainConfig& c = train;
  if (!(c.eta >= 0.0) || !std::isfinite(c.eta)) throw ConfigError("eta", "must be >= 0");
  if (!(c.lambda >= 0.0) || !std::isfinite(c.lambda))
    throw ConfigError("lambda", "must be >= 0");
  if (!(c.eta * c.lambda < 1.0)) throw ConfigError("lambda", "eta * lambda must be < 1");
  if (!(c.rho > 0.0) || !std::isfinite(c.rho)) throw ConfigError("rho", "must be > 0");
  if (c.batch_size < 1) throw ConfigError("batch_size", "must be >= 1");
  if (c.iterations < 0) throw ConfigError("iterations", "must be >= 0");
  if (!(c.eta2 >= 0.0) || !std::isfinite(c.eta2)) throw ConfigError("eta2", "must be >= 0");
  if (!(c.delta > 0.0 && c.delta < 1.0)) throw ConfigError("delta", "must lie in (0, 1)");
  if (!(c.epsilon > 0.0 && c.epsilon < 1.0))
    throw ConfigError("epsilon", "must lie in (0, 1)");
  if (seeds < 1) throw ConfigError("seeds", "must be >= 1");
  for (int r : trace_neurons)
    if (r < 0 || r >= m) throw ConfigError("trace_neurons", "index outside [0, m)");
  if (!output_dir.empty()) {
    std::error_code ec;
    fs::create_directories(output_dir, ec);
    if (ec || !fs::is_directory(output_dir))
      throw ConfigError("output_dir", "cannot create directory '" + output_dir + "'");
  }
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename Int>
Int parse_integer(const std::string& key, const std::string& text) {
  Int value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end)
    throw ConfigError(key, "expected an integer, got '" + text + "'");
  return value;
}

double parse_real(const std::string& key, const std::string& text) {
  if (text.empty()) throw ConfigError(key, "missing value");
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size() || !std::isfinite(v))
    throw ConfigError(key, "expected a finite number, got '" + text + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(key, "expected true or false, got '" + text + "'");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& text) {
  std::vector<int> out;
  for (const auto& item : split_list(text)) out.push_back(parse_integer<int>(key, item));
  return out;
}

std::string real_text(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
std::string join(const std::vector<T>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_same_v<T, Check>)
      out += to_string(items[i]);
    else
      out += std::to_string(items[i]);
  }
  return out;
}

}  // namespace

ExperimentSpec parse_spec(std::istream& in) {
  ExperimentSpec spec;
  std::map<std::string, int> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("", "line " + std::to_string(lineno) + ": expected `key = value`");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (seen[key]++) throw ConfigError(key, "duplicate key");
    TrainConfig& c = spec.train;
    if (key == "name") spec.name = value;
    else if (key == "d") spec.d = parse_integer<int>(key, value);
    else if (key == "k") spec.k = parse_integer<int>(key, value);
    else if (key == "m") spec.m = parse_integer<int>(key, value);
    else if (key == "support") spec.support = parse_int_list(key, value);
    else if (key == "eta") c.eta = parse_real(key, value);
    else if (key == "lambda") c.lambda = parse_real(key, value);
    else if (key == "rho") c.rho = parse_real(key, value);
    else if (key == "batch_size") c.batch_size = parse_integer<std::size_t>(key, value);
    else if (key == "iterations") c.iterations = parse_integer<int>(key, value);
    else if (key == "eta2") c.eta2 = parse_real(key, value);
    else if (key == "seed") c.seed = parse_integer<std::uint64_t>(key, value);
    else if (key == "delta") c.delta = parse_real(key, value);
    else if (key == "epsilon") c.epsilon = parse_real(key, value);
    else if (key == "second_layer_statistic") {
      try {
        c.second_layer_statistic = parse_second_layer_statistic(value);
      } catch (const RangeError& e) {
        throw ConfigError(key, e.what());
      }
    } else if (key == "seeds") spec.seeds = parse_integer<int>(key, value);
    else if (key == "mode") {
      try {
        spec.mode = parse_train_mode(value);
      } catch (const RangeError& e) {
        throw ConfigError(key, e.what());
      }
    } else if (key == "workers") spec.workers = parse_integer<unsigned>(key, value);
    else if (key == "checks") {
      spec.checks.clear();
      for (const auto& item : split_list(value)) spec.checks.push_back(parse_check(item));
    } else if (key == "trace") spec.trace = parse_bool(key, value);
    else if (key == "trace_neurons") spec.trace_neurons = parse_int_list(key, value);
    else if (key == "trace_full") spec.trace_full = parse_bool(key, value);
    else if (key == "output_dir") spec.output_dir = value;
    else throw ConfigError(key, "unknown key");
  }
  spec.validate();
  return spec;
}

ExperimentSpec load_spec(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file '" + path.string() + "'");
  return parse_spec(in);
}

std::string serialize_spec(const ExperimentSpec& spec) {
  std::ostringstream out;
  const TrainConfig& c = spec.train;
  out << "name = " << spec.name << '\n'
      << "d = " << spec.d << '\n'
      << "k = " << spec.k << '\n'
      << "m = " << spec.m << '\n';
  if (!spec.support.empty()) out << "support = " << join(spec.support) << '\n';
  out << "eta = " << real_text(c.eta) << '\n'
      << "lambda = " << real_text(c.lambda) << '\n'
      << "rho = " << real_text(c.rho) << '\n'
      << "batch_size = " << c.batch_size << '\n'
      << "iterations = " << c.iterations << '\n'
      << "eta2 = " << real_text(c.eta2) << '\n'
      << "second_layer_statistic = " << to_string(c.second_layer_statistic) << '\n'
      << "seed = " << c.seed << '\n'
      << "delta = " << real_text(c.delta) << '\n'
      << "epsilon = " << real_text(c.epsilon) << '\n'
      << "seeds = " << spec.seeds << '\n'
      << "mode = " << to_string(spec.mode) << '\n'
      << "workers = " << spec.workers << '\n'
      << "checks = " << join(spec.checks) << '\n'
      << "trace = " << (spec.trace ? "true" : "false") << '\n'
      << "trace_neurons = " << join(spec.trace_neurons) << '\n'
      << "trace_full = " << (spec.trace_full ? "true" : "false") << '\n'
      << "output_dir = " << spec.output_dir << '\n';
  return out.str();
}

std::optional<std::uint64_t> seed_from_environment() {
  const char* text = std::getenv("PARITY_SEED");
  if (!text || !*text) return std::nullopt;
  std::uint64_t value = 0;
  const char* end = text + std::char_traits<char>::length(text);
  const auto [ptr, ec] = std::from_chars(text, end, value);
  if (ec != std::errc() || ptr != end)
    throw ConfigError("PARITY_SEED", "expected an unsigned integer");
  return value;
}

std::uint64_t run_seed(std::uint64_t master, int index) {
  return derive_seed(master, StreamDomain::run, static_cast<std::uint64_t>(index));
}

// ---------------------------------------------------------------------------
// Running

bool RunReport::all_checks_passed() const {
  for (const auto& s : seeds)
    for (const auto& c : s.checks)
      if (!c.passed) return false;
  return true;
}

namespace {

struct SeedArtifacts {
  SeedResult result;
  std::string trace_csv;
};

bool wants(const ExperimentSpec& spec, Check check) {
  return std::find(spec.checks.begin(), spec.checks.end(), check) != spec.checks.end();
}

SeedArtifacts run_one_seed(const ExperimentSpec& spec, int index, unsigned eval_workers) {
  const ParityTask task = spec.task();
  SeedArtifacts out;
  out.result.index = index;
  out.result.seed = run_seed(spec.train.seed, index);
  TrainConfig cfg = spec.train;
  cfg.seed = out.result.seed;
  const Network net0 = init_binary(spec.m, spec.d, spec.k,
                                   derive_seed(cfg.seed, StreamDomain::init, 0));

  const bool record = spec.trace || wants(spec, Check::second_layer_drift);
  std::optional<TrajectoryTrace> trace;
  if (record) {
    TraceOptions opts;
    opts.neurons = spec.trace_neurons;
    opts.full = spec.trace_full;
    trace.emplace(task, cfg.rho, opts);
  }
  const TrainOutcome outcome =
      train(task, net0, cfg, spec.mode, trace ? &*trace : nullptr, eval_workers);
  out.result.summary = outcome.summary;
  auto& checks = out.result.checks;

  for (Check check : spec.checks) {
    switch (check) {
      case Check::population_dynamics: {
        if (!(cfg.eta * cfg.lambda > 0.0)) {
          checks.push_back({"population dynamics", false, 0.0, "needs eta * lambda > 0"});
          break;
        }
        const int T = required_population_iterations(spec.k, spec.d, cfg.eta, cfg.lambda);
        const auto rep = check_population_dynamics(task, net0, cfg, T);
        std::string pre;
        for (const auto& v : rep.precondition_violations) pre += (pre.empty() ? "" : "; ") + v;
        checks.push_back({"population dynamics preconditions",
                          rep.precondition_violations.empty(), 0.0, pre});
        checks.push_back(rep.good_features_frozen);
        checks.push_back(rep.bad_features_contract);
        checks.push_back(rep.final_magnitudes);
        break;
      }
      case Check::sign_agreement: {
        const auto rep = sign_agreement(task, net0, cfg);
        checks.push_back({"sign agreement", rep.all_agree, rep.mean - 1.0,
                          "mean agreement " + real_text(rep.mean)});
        break;
      }
      case Check::gradient_gap: {
        const auto rep = measure_gradient_gap(task, net0, cfg, 100,
                                              derive_seed(cfg.seed, StreamDomain::probe, 0));
        const double need = 1.0 - cfg.delta;
        checks.push_back({"gradient gap within epsilon1", rep.fraction_within_bound >= need,
                          rep.fraction_within_bound - need,
                          "median gap " + real_text(rep.median_gap) + ", epsilon1 " +
                              real_text(rep.epsilon1)});
        break;
      }
      case Check::approximation_ratio: {
        const double frac = approximation_ratio(outcome.network, task);
        const double need = 1.0 - cfg.epsilon;
        checks.push_back({"approximation ratio in [0.5, 1.5]", frac >= need, frac - need,
                          "fraction " + real_text(frac)});
        break;
      }
      case Check::second_layer_drift: {
        const auto rep = second_layer_drift(*trace, cfg.eta2, cfg.iterations, spec.k);
        checks.push_back({"second-layer drift", rep.passed(),
                          rep.step_bound - rep.max_drift,
                          "max drift " + real_text(rep.max_drift) + ", c " +
                              real_text(rep.constant)});
        break;
      }
      case Check::margin: {
        const double need = 1.0 - cfg.epsilon;
        const double frac = outcome.summary.margin_fraction;
        checks.push_back({"P(y f >= 0.25 k! m) >= 1 - epsilon", frac >= need, frac - need,
                          "fraction " + real_text(frac)});
        break;
      }
    }
  }
  if (spec.trace && trace) {
    std::ostringstream csv;
    trace->write_csv(csv);
    out.trace_csv = csv.str();
  }
  return out;
}

json check_json(const LemmaCheck& c) {
  return json{{"name", c.name}, {"passed", c.passed}, {"slack", c.slack}, {"detail", c.detail}};
}

json spec_json(const ExperimentSpec& spec) {
  const TrainConfig& c = spec.train;
  const ParityTask task = spec.task();
  json support = json::array();
  for (int j : task.support()) support.push_back(j);
  json checks = json::array();
  for (Check ch : spec.checks) checks.push_back(to_string(ch));
  return json{{"d", spec.d},
              {"k", spec.k},
              {"support", support},
              {"m", spec.m},
              {"eta", c.eta},
              {"lambda", c.lambda},
              {"rho", c.rho},
              {"batch_size", c.batch_size},
              {"iterations", c.iterations},
              {"eta2", c.eta2},
              {"second_layer_statistic", to_string(c.second_layer_statistic)},
              {"master_seed", c.seed},
              {"delta", c.delta},
              {"epsilon", c.epsilon},
              {"seeds", spec.seeds},
              {"mode", to_string(spec.mode)},
              {"checks", checks}};
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << content;
}

void flush_report(const RunReport& report) {
  if (report.spec.output_dir.empty()) return;
  const fs::path dir(report.spec.output_dir);
  fs::create_directories(dir);
  write_file(dir / "report.json", report_json(report));
  write_file(dir / "report.txt", report_text(report));
}

}  // namespace

std::string report_json(const RunReport& report) {
  json seeds = json::array();
  for (const auto& s : report.seeds) {
    json checks = json::array();
    for (const auto& c : s.checks) checks.push_back(check_json(c));
    const auto& n = s.summary.neurons;
    seeds.push_back(json{
        {"index", s.index},
        {"seed", s.seed},
        {"test_accuracy", s.summary.test_accuracy},
        {"accuracy_exact", s.summary.accuracy_exact},
        {"margin_fraction", s.summary.margin_fraction},
        {"margin_threshold", s.summary.margin_threshold},
        {"samples_consumed", s.summary.samples_consumed},
        {"neurons",
         json{{"good", n.good},
              {"bad", n.bad},
              {"max_bad_coordinate", n.max_bad_coordinate},
              {"max_good_noise", n.max_good_noise},
              {"min_good_feature", n.min_good_feature}}},
        {"checks", checks}});
  }
  json doc{{"schema", kReportSchema},
           {"name", report.name},
           {"status", report.failed ? "failed" : "ok"},
           {"failure", report.failure},
           {"rng", kRngScheme},
           {"config", spec_json(report.spec)},
           {"aggregate",
            json{{"mean_accuracy", report.mean_accuracy},
                 {"std_accuracy", report.std_accuracy ? json(*report.std_accuracy) : json(nullptr)},
                 {"mean_margin_fraction", report.mean_margin_fraction},
                 {"samples_per_seed", report.samples_per_seed},
                 {"all_checks_passed", report.all_checks_passed()}}},
           {"seeds", seeds},
           {"condition_warnings", report.condition_warnings},
           {"notes", report.notes}};
  return doc.dump(2) + "\n";
}

std::string report_text(const RunReport& report) {
  const ExperimentSpec& s = report.spec;
  const TrainConfig& c = s.train;
  std::ostringstream out;
  char buf[256];
  out << "experiment " << report.name << (report.failed ? "  [FAILED]" : "") << '\n';
  std::snprintf(buf, sizeof buf,
                "  d=%d k=%d m=%d mode=%s eta=%g lambda=%g rho=%g B=%zu T=%d eta2=%g seeds=%d\n",
                s.d, s.k, s.m, to_string(s.mode).c_str(), c.eta, c.lambda, c.rho,
                c.batch_size, c.iterations, c.eta2, s.seeds);
  out << buf;
  if (report.failed) out << "  failure: " << report.failure << '\n';
  const bool exact = report.seeds.empty() || report.seeds.front().summary.accuracy_exact;
  std::snprintf(buf, sizeof buf, "  test accuracy (%s): mean %.4f%%", exact ? "exact" : "monte carlo",
                100.0 * report.mean_accuracy);
  out << buf;
  if (report.std_accuracy) {
    std::snprintf(buf, sizeof buf, " +- %.4f%%", 100.0 * *report.std_accuracy);
    out << buf;
  }
  out << '\n';
  std::snprintf(buf, sizeof buf, "  P(y f >= 0.25 k! m): mean %.4f\n", report.mean_margin_fraction);
  out << buf;
  out << "  samples per seed: " << report.samples_per_seed << '\n';
  for (const auto& r : report.seeds) {
    std::snprintf(buf, sizeof buf, "  seed %d: accuracy %.6f margin-fraction %.4f good %d bad %d\n",
                  r.index, r.summary.test_accuracy, r.summary.margin_fraction,
                  r.summary.neurons.good, r.summary.neurons.bad);
    out << buf;
    for (const auto& ch : r.checks)
      out << "    " << (ch.passed ? "PASS " : "FAIL ") << ch.name
          << (ch.detail.empty() ? "" : " (" + ch.detail + ")") << '\n';
  }
  if (!report.condition_warnings.empty()) {
    out << "  condition warnings (C = 1):\n";
    for (const auto& w : report.condition_warnings) out << "    - " << w << '\n';
  }
  for (const auto& n : report.notes) out << "  note: " << n << '\n';
  return out.str();
}

RunReport run(const ExperimentSpec& spec) {
  spec.validate();
  const auto start = std::chrono::steady_clock::now();
  const ParityTask task = spec.task();
  RunReport report;
  report.name = spec.name;
  report.spec = spec;
  report.samples_per_seed = spec.mode == TrainMode::stochastic
                                ? static_cast<std::uint64_t>(spec.train.batch_size) *
                                      static_cast<std::uint64_t>(spec.train.iterations)
                                : 0;
  report.condition_warnings = validate_condition(task, spec.m, spec.train);
  if (spec.d <= kMaxEnumerationDim)
    report.notes.push_back(
        "test accuracy is exact over all 2^d inputs; published figures used an unstated "
        "test-set size, so small gaps may come from that difference");
  else
    report.notes.push_back("test accuracy is a Monte-Carlo estimate over 1e5 inputs");

  unsigned workers = spec.workers ? spec.workers : std::max(1U, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(spec.seeds));
  const unsigned eval_workers = workers > 1 ? 1 : spec.workers;

  std::vector<SeedArtifacts> results(static_cast<std::size_t>(spec.seeds));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(spec.seeds));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int s = next++; s < spec.seeds; s = next++) {
      try {
        results[static_cast<std::size_t>(s)] = run_one_seed(spec, s, eval_workers);
      } catch (...) {
        errors[static_cast<std::size_t>(s)] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  for (int s = 0; s < spec.seeds; ++s) {
    if (errors[static_cast<std::size_t>(s)]) {
      report.failed = true;
      try {
        std::rethrow_exception(errors[static_cast<std::size_t>(s)]);
      } catch (const std::exception& e) {
        report.failure = "seed " + std::to_string(s) + ": " + e.what();
      }
      flush_report(report);
      std::rethrow_exception(errors[static_cast<std::size_t>(s)]);
    }
    report.seeds.push_back(results[static_cast<std::size_t>(s)].result);
  }

  double sum = 0.0, margin_sum = 0.0;
  for (const auto& r : report.seeds) {
    sum += r.summary.test_accuracy;
    margin_sum += r.summary.margin_fraction;
  }
  const double n = static_cast<double>(report.seeds.size());
  report.mean_accuracy = sum / n;
  report.mean_margin_fraction = margin_sum / n;
  if (report.seeds.size() >= 2) {
    double ss = 0.0;
    for (const auto& r : report.seeds) {
      const double dv = r.summary.test_accuracy - report.mean_accuracy;
      ss += dv * dv;
    }
    report.std_accuracy = std::sqrt(ss / (n - 1.0));
  }

  if (!spec.output_dir.empty()) {
    flush_report(report);
    if (spec.trace)
      for (const auto& r : results)
        write_file(fs::path(spec.output_dir) /
                       ("trace_seed" + std::to_string(r.result.index) + ".csv"),
                   r.trace_csv);
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

// ---------------------------------------------------------------------------
// Published accuracy table

std::vector<Table3Row> reproduce_table3(const fs::path& config_dir,
                                        const std::string& output_dir, unsigned workers) {
  std::vector<Table3Row> rows;
  for (const auto& published : kPublishedTable3) {
    ExperimentSpec spec =
        load_spec(config_dir / ("k" + std::to_string(published.k) + ".cfg"));
    spec.seeds = 10;
    spec.workers = workers;
    spec.trace = false;
    spec.output_dir =
        output_dir.empty() ? std::string{} : (fs::path(output_dir) / spec.name).string();
    const RunReport report = run(spec);
    rows.push_back({published.k, spec.seeds, 100.0 * report.mean_accuracy,
                    100.0 * report.std_accuracy.value_or(0.0), published.mean, published.std});
  }
  return rows;
}

std::string format_table3(const std::vector<Table3Row>& rows) {
  std::ostringstream out;
  char buf[160];
  out << "  k  seeds   reproduced (%)        published (%)\n";
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "  %d  %5d   %7.2f +- %5.2f      %6.2f +- %4.2f\n", r.k, r.seeds,
                  r.mean, r.std, r.published_mean, r.published_std);
    out << buf;
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Figure traces

NeuronSelector NeuronSelector::parse(const std::string& text) {
  if (text == "good") return {Kind::first_good, 0};
  if (text == "bad") return {Kind::first_bad, 0};
  NeuronSelector sel;
  sel.index = parse_integer<int>("neuron", text);
  if (sel.index < 0) throw ConfigError("neuron", "index must be >= 0");
  return sel;
}

FigureTraces emit_figure_traces(const ExperimentSpec& spec,
                                const std::vector<NeuronSelector>& selectors) {
  if (!spec.trace) throw Error("emit_figure_traces: recording is disabled (trace = false)");
  spec.validate();
  const ParityTask task = spec.task();
  TrainConfig cfg = spec.train;
  cfg.seed = run_seed(spec.train.seed, 0);
  const Network net0 =
      init_binary(spec.m, spec.d, spec.k, derive_seed(cfg.seed, StreamDomain::init, 0));
  const NeuronTaxonomy tax = classify_neurons(net0, task, cfg.delta);

  std::vector<int> chosen;
  for (const auto& sel : selectors) {
    int r = sel.index;
    if (sel.kind == NeuronSelector::Kind::first_good) {
      if (tax.good.empty()) throw Error("emit_figure_traces: no good neuron at this seed");
      r = tax.good.front();
    } else if (sel.kind == NeuronSelector::Kind::first_bad) {
      if (tax.bad.empty()) throw Error("emit_figure_traces: no bad neuron at this seed");
      r = tax.bad.front();
    }
    if (r < 0 || r >= spec.m) throw RangeError("emit_figure_traces: neuron index out of range");
    if (std::find(chosen.begin(), chosen.end(), r) == chosen.end()) chosen.push_back(r);
  }

  TraceOptions opts;
  opts.neurons = chosen;
  opts.population_signs = spec.mode == TrainMode::stochastic;
  FigureTraces out{TrajectoryTrace(task, cfg.rho, opts), {}};
  run_training(task, net0, cfg, spec.mode, &out.trace);

  for (int r : chosen) {
    FigureNeuron fn;
    fn.neuron = r;
    fn.good = tax.is_good[static_cast<std::size_t>(r)];
    for (int j : task.support())
      fn.initial_feature_signs.push_back(net0.weight(r, j) > 0.0 ? 1 : -1);
    fn.initial_a = net0.output_weight(r);
    if (!spec.output_dir.empty()) {
      fs::create_directories(spec.output_dir);
      const fs::path path =
          fs::path(spec.output_dir) / (spec.name + "_neuron" + std::to_string(r) + ".csv");
      std::ostringstream csv;
      csv << "# neuron=" << r << " class=" << (fn.good ? "good" : "bad") << " init_features=";
      for (std::size_t i = 0; i < fn.initial_feature_signs.size(); ++i)
        csv << (i ? "," : "") << (fn.initial_feature_signs[i] > 0 ? "+1" : "-1");
      csv << " a0=" << (fn.initial_a > 0 ? "+1" : "-1") << " k=" << spec.k
          << " mode=" << to_string(spec.mode) << '\n';
      out.trace.write_csv(csv, r);
      write_file(path, csv.str());
      fn.path = path.string();
    }
    out.neurons.push_back(fn);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Verification suite

std::vector<LemmaCheck> run_verification(unsigned workers) {
  std::vector<LemmaCheck> out;

  {  // constant margin of the good network
    bool ok = true;
    for (int k = 1; k <= 6; ++k) {
      const Network good = construct_good_network(k);
      const ParityTask task = ParityTask::canonical(k, k);
      const double expected = factorial(k) * std::ldexp(1.0, k);
      for (const Sample& s : enumerate_all(task)) ok = ok && margin(good, s) == expected;
    }
    out.push_back({"good-network margin equals k! 2^k (k = 1..6)", ok, 0.0, ""});
  }
  {
    bool ok = true;
    for (int k = 1; k <= 15; ++k) ok = ok && identity_F2(k).holds();
    for (int k = 1; k <= 30; ++k) ok = ok && bound_F3(k).holds();
    out.push_back({"alternating binomial identity and absolute-sum bound", ok, 0.0, ""});
  }
  {  // closed-form population gradient against enumeration
    double worst = 0.0;
    const std::pair<int, int> settings[] = {{8, 2}, {8, 3}, {10, 4}};
    for (const auto& [d, k] : settings) {
      const ParityTask task = ParityTask::canonical(d, k);
      for (int i = 0; i < 10; ++i) {
        const Network net = init_uniform(6, d, k, derive_seed(77, StreamDomain::probe, i));
        const auto closed = population_gradient(net, task);
        const auto enumerated = exact_gradient(net, task);
        double scale = 0.0, diff = 0.0;
        for (std::size_t e = 0; e < closed.first.size(); ++e) {
          scale = std::max(scale, std::abs(enumerated.first[e]));
          diff = std::max(diff, std::abs(closed.first[e] - enumerated.first[e]));
        }
        worst = std::max(worst, diff / scale);
      }
    }
    out.push_back({"population gradient closed form vs enumeration", worst <= 1e-9,
                   1e-9 - worst, "max relative error " + real_text(worst)});
  }
  {
    const ParityTask task = ParityTask::canonical(16, 3);
    TrainConfig cfg;
    cfg.eta = 0.05;
    cfg.rho = 0.6;
    const int T = required_population_iterations(3, 16, cfg.eta, cfg.lambda);
    const auto rep = check_population_dynamics(task, init_binary(48, 16, 3, 1), cfg, T);
    out.push_back(rep.good_features_frozen);
    out.push_back(rep.bad_features_contract);
    out.push_back(rep.final_magnitudes);
  }
  {
    const auto rep = group_size_check(8 * 512, 2, 200, 0.05);
    out.push_back({"neuron-group sizes concentrate", rep.pass_fraction >= 0.95,
                   rep.pass_fraction - 0.95, "pass fraction " + real_text(rep.pass_fraction)});
  }
  {
    const ParityTask task = ParityTask::canonical(8, 2);
    TrainConfig cfg;
    cfg.batch_size = 64;
    const Network net = init_binary(12, 8, 2, 5);
    const auto small = measure_gradient_gap(task, net, cfg, 100, 11);
    cfg.batch_size = 256;
    const auto large = measure_gradient_gap(task, net, cfg, 100, 12);
    const double ratio = small.median_gap / large.median_gap;
    out.push_back({"gradient gap shrinks ~2x when B grows 4x", ratio >= 1.6 && ratio <= 2.4,
                   std::min(ratio - 1.6, 2.4 - ratio), "ratio " + real_text(ratio)});
  }
  {
    const ParityTask task = ParityTask::canonical(8, 2);
    TrainConfig cfg;
    cfg.iterations = 100;
    cfg.eta2 = second_layer_drift_constant(2) / (4.0 * cfg.iterations);
    TraceOptions opts;
    TrajectoryTrace trace(task, cfg.rho, opts);
    run_training(task, init_binary(12, 8, 2, 3), cfg, TrainMode::stochastic, &trace);
    const auto rep = second_layer_drift(trace, cfg.eta2, cfg.iterations, 2);
    out.push_back({"second-layer drift and sign stability", rep.passed(),
                   rep.step_bound - rep.max_drift, "max drift " + real_text(rep.max_drift)});
  }
  (void)workers;
  return out;
}

}  // namespace sparity
