#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sparity/network.hpp"
#include "sparity/optimizer.hpp"
#include "sparity/parity_data.hpp"

namespace sparity {

// ---------------------------------------------------------------------------
// Trajectory recording

struct TraceOptions {
  std::vector<int> neurons{0};   // neurons whose full weight vectors are kept
  bool full = false;             // record every neuron (overrides `neurons`)
  bool population_signs = false; // also evaluate the population tilde-signs
};

struct TraceStep {
  int step = 0;
  std::vector<std::vector<double>> weights;  // one vector of length d per recorded neuron
  std::vector<double> second_layer;          // all m second-layer values
  std::vector<std::vector<int>> sign_applied;     // empty after the last step
  std::vector<std::vector<int>> sign_population;  // empty unless requested
  double agreement = 1.0;  // fraction of all (r, j) with equal signs, if requested
  double max_bad_coordinate = 0.0;
  double max_good_noise = 0.0;
};

/// StepObserver that keeps per-step snapshots of selected neurons plus
/// class-level aggregates. Neuron classes come from the first observed step.
class TrajectoryTrace : public StepObserver {
 public:
  TrajectoryTrace(ParityTask task, double rho, TraceOptions options = {});

  void observe(int step, const Network& weights,
               const GradientEstimate* gradient) override;

  const std::vector<TraceStep>& steps() const noexcept { return steps_; }
  const std::vector<int>& neurons() const noexcept { return neurons_; }
  const NeuronTaxonomy& taxonomy() const;
  bool empty() const noexcept { return steps_.empty(); }

  /// `t,neuron,coord,value,kind` rows; kind is weight, a, sign_stoch or
  /// sign_pop. The coord column is empty for kind a.
  void write_csv(std::ostream& out) const;
  /// Rows of one recorded neuron only.
  void write_csv(std::ostream& out, int neuron) const;

 private:
  ParityTask task_;
  double rho_;
  TraceOptions options_;
  std::vector<int> neurons_;
  std::vector<TraceStep> steps_;
  std::vector<NeuronTaxonomy> taxonomy_;  // holds at most one element
};

// ---------------------------------------------------------------------------
// Lemma checks

struct LemmaCheck {
  std::string name;
  bool passed = false;
  double slack = 0.0;  // distance to the violated side; negative when failing
  std::string detail;
};

struct PopulationDynamicsReport {
  std::vector<std::string> precondition_violations;
  int iterations = 0;
  int required_iterations = 0;  // ceil((k+1) (eta lambda)^-1 log d)
  LemmaCheck good_features_frozen;
  LemmaCheck bad_features_contract;
  LemmaCheck final_magnitudes;
  LemmaCheck noise_geometric_decay;

  bool passed() const {
    return good_features_frozen.passed && bad_features_contract.passed &&
           final_magnitudes.passed;
  }
};

int required_population_iterations(int k, int d, double eta, double lambda);

/// Population-mode training from net0 for T steps, checking frozen good
/// features, contracting bad features and the final magnitude bound.
/// Precondition violations are listed, never thrown.
PopulationDynamicsReport check_population_dynamics(const ParityTask& task,
                                                   const Network& net0,
                                                   const TrainConfig& cfg, int T);

/// Analytic concentration radius of the batch statistic around its
/// expectation, normalized by ||w_r||^(k-1).
double gradient_gap_bound(int k, int d, int m, std::size_t B, int T, double delta);

struct GradientGapReport {
  std::vector<double> gaps;       // per batch: max_rj |pop - batch| / ||w_r||^(k-1)
  std::vector<double> agreement;  // per batch: tilde-sign agreement fraction
  double median_gap = 0.0;
  double max_gap = 0.0;
  double epsilon1 = 0.0;
  double fraction_within_bound = 0.0;
};

/// Draws n_batches fresh batches (size cfg.batch_size) at fixed weights from
/// streams derive_seed(stream_seed, probe, i).
GradientGapReport measure_gradient_gap(const ParityTask& task, const Network& net,
                                       const TrainConfig& cfg, int n_batches,
                                       std::uint64_t stream_seed);

/// Max normalized gap between two gradient estimates of the same network.
double normalized_gap(const Network& net, const GradientEstimate& lhs,
                      const GradientEstimate& rhs);

struct SignAgreementReport {
  std::vector<double> per_step;
  bool all_agree = true;
  double mean = 1.0;
  Network final_network;
};

/// Trains with `reference` mode and, at every step, compares its tilde-signs
/// with the population tilde-signs evaluated at the same weights.
SignAgreementReport sign_agreement(const ParityTask& task, const Network& net0,
                                   const TrainConfig& cfg,
                                   TrainMode reference = TrainMode::stochastic);

/// Fraction of hypercube inputs with f(W,x) / ((m / 2^(k+1)) f(W*,x)) in
/// [0.5, 1.5], W* the good network on the task's support.
double approximation_ratio(const Network& trained, const ParityTask& task);

/// (1/4) sqrt(pi k / 8) ((e + 1/e) / 2)^-k.
double second_layer_drift_constant(int k);

struct DriftReport {
  double max_drift = 0.0;
  double step_bound = 0.0;   // eta2 * T
  double constant = 0.0;     // c
  bool within_step_bound = true;  // drift_t <= eta2 * t for every t
  bool constant_applies = false;  // eta2 <= c / T
  bool within_constant = true;
  bool signs_preserved = true;
  bool passed() const {
    return within_step_bound && (!constant_applies || within_constant) && signs_preserved;
  }
};

/// Throws Error when the trace holds no second-layer values.
DriftReport second_layer_drift(const TrajectoryTrace& trace, double eta2, int T, int k);

struct IntegerIdentity {
  std::int64_t lhs = 0;
  std::int64_t rhs = 0;
  bool holds() const { return lhs == rhs; }
};

/// sum_i C(k,i) (-1)^i (k-2i)^k against 2^k k!, 1 <= k <= 15. Intermediate
/// terms exceed 64 bits for k >= 13 and are carried in 128-bit integers with
/// overflow detection.
IntegerIdentity identity_F2(int k);

struct RealBound {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds() const { return lhs <= rhs; }
};

/// sum_i C(k,i) |k-2i|^k against 2 k^k (1 + e^-2)^k, 1 <= k <= 30, in the
/// log domain.
RealBound bound_F3(int k);

struct GroupSizeReport {
  int seeds = 0;
  int passing_seeds = 0;
  double pass_fraction = 0.0;
  double alpha = 0.0;
  bool vacuous = false;  // alpha >= 1
  std::vector<std::string> warnings;
};

/// Whether every |group ∩ good| and |group ∩ bad| (all 2^k patterns) lies
/// in [(1 - alpha) m / 2^(k+1), (1 + alpha) m / 2^(k+1)].
bool group_sizes_within(const NeuronTaxonomy& taxonomy, int m, int k, double alpha);

/// Fraction of n_seeds binary initializations whose group sizes pass.
GroupSizeReport group_size_check(int m, int k, int n_seeds, double delta,
                                 std::uint64_t master_seed = 0);

}  // namespace sparity
