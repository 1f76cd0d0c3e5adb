#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sparity/analysis.hpp"
#include "sparity/network.hpp"
#include "sparity/optimizer.hpp"
#include "sparity/parity_data.hpp"

namespace sparity {

inline constexpr int kReportSchema = 1;

/// Analysis checks a run can request per seed.
enum class Check {
  population_dynamics,
  sign_agreement,
  gradient_gap,
  approximation_ratio,
  second_layer_drift,
  margin,
};

std::string to_string(Check check);
Check parse_check(const std::string& text);

/// One experiment: task, width, hyperparameters, repeats and outputs.
///
/// Configuration keys (`key = value`, `#` starts a comment):
///   name                    free text                       [experiment]
///   d, k, m                 positive integers               [8, 2, 12]
///   support                 comma-separated 0-based indices [0..k-1]
///   eta, lambda, rho        step size, decay, threshold     [0.1, 1, 0.3]
///   batch_size, iterations  B and T                         [64, 25]
///   eta2                    second-layer step, 0 = fixed    [0]
///   second_layer_statistic  with_label | without_label      [with_label]
///   seed                    master seed                     [0]
///   delta, epsilon          condition-check parameters      [0.05, 0.1]
///   seeds                   repeats                         [1]
///   mode                    stochastic | population         [stochastic]
///   workers                 parallel seeds, 0 = all cores   [0]
///   checks                  comma list of Check names       []
///   trace                   record trajectories (bool)      [false]
///   trace_neurons           comma list of neuron indices    [0]
///   trace_full              record every neuron (bool)      [false]
///   output_dir              where reports go, empty = none  []
struct ExperimentSpec {
  std::string name = "experiment";
  int d = 8;
  int k = 2;
  std::vector<int> support;  // empty means canonical
  int m = 12;
  TrainConfig train;
  int seeds = 1;
  TrainMode mode = TrainMode::stochastic;
  unsigned workers = 0;
  std::vector<Check> checks;
  bool trace = false;
  std::vector<int> trace_neurons{0};
  bool trace_full = false;
  std::string output_dir;

  ParityTask task() const;
  /// Throws ConfigError naming the first violated invariant.
  void validate() const;

  friend bool operator==(const ExperimentSpec&, const ExperimentSpec&) = default;
};

ExperimentSpec parse_spec(std::istream& in);
ExperimentSpec load_spec(const std::filesystem::path& path);
/// Every key written explicitly; parse_spec(serialize_spec(s)) == s.
std::string serialize_spec(const ExperimentSpec& spec);

/// Master seed from the PARITY_SEED environment variable, if set and valid.
std::optional<std::uint64_t> seed_from_environment();

/// Sub-seed used by run() for repeat `index`.
std::uint64_t run_seed(std::uint64_t master, int index);

struct SeedResult {
  int index = 0;
  std::uint64_t seed = 0;
  TrainSummary summary;
  std::vector<LemmaCheck> checks;
};

struct RunReport {
  std::string name;
  ExperimentSpec spec;
  std::vector<SeedResult> seeds;
  double mean_accuracy = 0.0;
  std::optional<double> std_accuracy;  // sample std, only with >= 2 seeds
  double mean_margin_fraction = 0.0;
  std::uint64_t samples_per_seed = 0;
  std::vector<std::string> condition_warnings;
  std::vector<std::string> notes;
  bool failed = false;
  std::string failure;
  double wall_seconds = 0.0;  // console only; excluded from files

  bool all_checks_passed() const;
};

/// Fixed-schema JSON document (schema = 1), deterministic for a given spec.
std::string report_json(const RunReport& report);
/// Human-readable summary block.
std::string report_text(const RunReport& report);

/// Trains every seed, evaluates, runs the requested checks, aggregates and
/// (when spec.output_dir is set) writes report.json, report.txt and
/// trace_seed<N>.csv files. On failure a report with status "failed" is
/// flushed before the exception propagates.
RunReport run(const ExperimentSpec& spec);

struct Table3Row {
  int k = 0;
  int seeds = 0;
  double mean = 0.0;
  double std = 0.0;
  double published_mean = 0.0;
  double published_std = 0.0;
};

/// Published accuracies (percent) for k = 2, 3, 4.
struct PublishedAccuracy {
  int k;
  double mean;
  double std;
};
inline constexpr PublishedAccuracy kPublishedTable3[] = {
    {2, 99.69, 0.29}, {3, 97.75, 1.37}, {4, 96.89, 0.44}};

/// Runs k2.cfg, k3.cfg and k4.cfg from `config_dir` (10 seeds each) and
/// returns accuracy rows in percent. Reports go below `output_dir` if set.
std::vector<Table3Row> reproduce_table3(const std::filesystem::path& config_dir,
                                        const std::string& output_dir = {},
                                        unsigned workers = 0);
std::string format_table3(const std::vector<Table3Row>& rows);

struct NeuronSelector {
  enum class Kind { index, first_good, first_bad };
  Kind kind = Kind::index;
  int index = 0;

  static NeuronSelector parse(const std::string& text);
};

struct FigureNeuron {
  int neuron = 0;
  bool good = false;
  std::vector<int> initial_feature_signs;
  double initial_a = 0.0;
  std::string path;  // empty when nothing was written
};

struct FigureTraces {
  TrajectoryTrace trace;
  std::vector<FigureNeuron> neurons;
};

/// Retrains the first seed of `spec` recording the selected neurons and
/// writes one CSV per neuron (class and initial pattern in a `#` header).
/// Throws Error when spec.trace is false.
FigureTraces emit_figure_traces(const ExperimentSpec& spec,
                                const std::vector<NeuronSelector>& selectors);

/// The lemma suite behind `sparity verify`, at reduced sizes.
std::vector<LemmaCheck> run_verification(unsigned workers = 0);

}  // namespace sparity
