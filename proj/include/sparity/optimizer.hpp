#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sparity/network.hpp"
#include "sparity/parity_data.hpp"

namespace sparity {

/// Which statistic drives the second-layer update.
///  with_label:    h_r = mean of y * sigma(<w_r, x>)  (correlation-loss gradient)
///  without_label: h_r = mean of sigma(<w_r, x>)      (literal printed form)
enum class SecondLayerStatistic { with_label, without_label };

std::string to_string(SecondLayerStatistic s);
SecondLayerStatistic parse_second_layer_statistic(const std::string& text);

struct TrainConfig {
  double eta = 0.1;      // first-layer step size
  double lambda = 1.0;   // weight decay
  double rho = 0.3;      // dead-zone threshold of the modified sign
  std::size_t batch_size = 64;
  int iterations = 25;
  double eta2 = 0.0;     // second-layer step size; 0 keeps the layer fixed
  std::uint64_t seed = 0;
  double delta = 0.05;   // failure probability used by condition checks
  double epsilon = 0.1;  // target test error used by condition checks
  SecondLayerStatistic second_layer_statistic = SecondLayerStatistic::with_label;

  bool trains_second_layer() const noexcept { return eta2 > 0.0; }
  /// Throws RangeError naming the violated invariant.
  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Per-coordinate correlation statistic g_rj (row-major m x d) and, when the
/// second layer is trained, the per-neuron statistic h_r.
struct GradientEstimate {
  int m = 0;
  int d = 0;
  std::vector<double> first;
  std::vector<double> second;

  double at(int r, int j) const { return first[static_cast<std::size_t>(r) * d + j]; }
  bool has_second() const noexcept { return !second.empty(); }
};

/// +1 for x >= rho, -1 for x <= -rho, 0 in between. Throws NonFiniteError /
/// RangeError.
int tilde_sign(double x, double rho);

/// g_rj = (1/B) sum_i k <w_r,x_i>^(k-1) a_r y_i x_ij, summed over samples in
/// order, then neurons. h_r is filled when `with_second_layer`.
GradientEstimate batch_gradient(
    const Network& net, const Batch& batch, bool with_second_layer = false,
    SecondLayerStatistic statistic = SecondLayerStatistic::with_label);

/// Closed-form expectation of the batch statistic under the uniform
/// distribution: for j in A, k! a_r prod_{i in A, i != j} w_ri; zero off A.
/// h_r = k! prod_{i in A} w_ri (with label) or E[<w_r,x>^k] (without).
GradientEstimate population_gradient(
    const Network& net, const ParityTask& task, bool with_second_layer = false,
    SecondLayerStatistic statistic = SecondLayerStatistic::with_label);

/// E[<w, x>^n] for x uniform on the hypercube, by a moment recursion over
/// coordinates.
double hypercube_moment(std::span<const double> w, int n);

/// Jacobi update: w <- (1 - eta lambda) w + eta tilde_sign(g, rho), and
/// a <- a + eta2 tilde_sign(h, rho) when h is present and eta2 > 0.
Network sgd_step(const Network& net, const GradientEstimate& grad,
                 const TrainConfig& cfg);

enum class TrainMode { stochastic, population };

std::string to_string(TrainMode mode);
TrainMode parse_train_mode(const std::string& text);

/// Hook invoked with the weights before every step (with the gradient used
/// for that step) and once more after the last step (gradient == nullptr).
class StepObserver {
 public:
  virtual ~StepObserver() = default;
  virtual void observe(int step, const Network& weights,
                       const GradientEstimate* gradient) = 0;
};

struct NeuronClassSummary {
  int good = 0;
  int bad = 0;
  double max_bad_coordinate = 0.0;    // max |w_rj| over bad neurons
  double max_good_noise = 0.0;        // max |w_rj| over good neurons, j not in A
  double min_good_feature = 0.0;      // min |w_rj| over good neurons, j in A
};

struct TrainSummary {
  double test_accuracy = 0.0;
  bool accuracy_exact = true;
  /// Fraction of inputs with y f >= 0.25 k! m.
  double margin_fraction = 0.0;
  double margin_threshold = 0.0;
  std::uint64_t samples_consumed = 0;
  NeuronClassSummary neurons;
};

struct TrainOutcome {
  Network network;
  TrainSummary summary;
};

/// Seed for the batch of step t of a run seeded with `seed`.
std::uint64_t batch_seed(std::uint64_t seed, int step);

/// The step loop of train() without the final evaluation.
Network run_training(const ParityTask& task, const Network& net0,
                     const TrainConfig& cfg, TrainMode mode = TrainMode::stochastic,
                     StepObserver* observer = nullptr);

/// Runs cfg.iterations steps from net0. Stochastic mode draws a fresh batch
/// per step from the stream derive_seed(cfg.seed, batch, t); population
/// mode uses population_gradient. The net's second-layer mode is switched
/// to trainable when cfg.eta2 > 0.
TrainOutcome train(const ParityTask& task, const Network& net0,
                   const TrainConfig& cfg, TrainMode mode = TrainMode::stochastic,
                   StepObserver* observer = nullptr, unsigned eval_workers = 0);

/// Test accuracy, margin fraction and neuron summary for a finished run.
/// Exact when d <= 24, otherwise Monte-Carlo with 1e5 samples.
TrainSummary summarize(const ParityTask& task, const Network& net0,
                       const Network& trained, const TrainConfig& cfg,
                       unsigned eval_workers = 0);

/// One warning per violated bullet of the reference training condition,
/// instantiated with constant C = 1. Never throws.
std::vector<std::string> validate_condition(const ParityTask& task, int m,
                                            const TrainConfig& cfg);

double factorial(int n);

}  // namespace sparity
