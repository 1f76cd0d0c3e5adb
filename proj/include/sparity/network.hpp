#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sparity/parity_data.hpp"
#include "sparity/rng.hpp"

namespace sparity {

enum class SecondLayerMode { fixed, trainable };

std::string to_string(SecondLayerMode mode);
SecondLayerMode parse_second_layer_mode(const std::string& text);

/// Two-layer network f(W, x) = sum_r a_r <w_r, x>^k with no biases.
class Network {
 public:
  Network(int m, int d, int k, std::vector<double> weights,
          std::vector<double> second_layer,
          SecondLayerMode mode = SecondLayerMode::fixed);

  int width() const noexcept { return m_; }
  int dim() const noexcept { return d_; }
  int degree() const noexcept { return k_; }
  SecondLayerMode mode() const noexcept { return mode_; }

  std::span<const double> row(int r) const {
    return {w_.data() + static_cast<std::size_t>(r) * d_,
            static_cast<std::size_t>(d_)};
  }
  std::span<double> row(int r) {
    return {w_.data() + static_cast<std::size_t>(r) * d_,
            static_cast<std::size_t>(d_)};
  }
  double weight(int r, int j) const {
    return w_[static_cast<std::size_t>(r) * d_ + j];
  }
  double& weight(int r, int j) { return w_[static_cast<std::size_t>(r) * d_ + j]; }
  double output_weight(int r) const { return a_[static_cast<std::size_t>(r)]; }
  double& output_weight(int r) { return a_[static_cast<std::size_t>(r)]; }

  const std::vector<double>& weights() const noexcept { return w_; }
  const std::vector<double>& second_layer() const noexcept { return a_; }

  void set_mode(SecondLayerMode mode) { mode_ = mode; }

  /// sigma(z) = z^k by repeated multiplication (exact for small integers).
  double activation(double z) const noexcept;
  /// sigma'(z) = k z^(k-1).
  double activation_derivative(double z) const noexcept;

  friend bool operator==(const Network&, const Network&) = default;

 private:
  int m_;
  int d_;
  int k_;
  std::vector<double> w_;
  std::vector<double> a_;
  SecondLayerMode mode_;
};

/// All first- and second-layer entries i.i.d. uniform on {-1,+1}; rows of W
/// are drawn first (row-major), then a.
Network init_binary(int m, int d, int k, std::uint64_t seed);

/// Real-valued first layer, entries uniform on [-scale, scale]; second
/// layer +-1. Used to probe closed forms away from binary weights.
Network init_uniform(int m, int d, int k, std::uint64_t seed, double scale = 1.0);

/// Inner product <w_r, x>, summed left to right.
double preactivation(const Network& net, int r, std::span<const double> x);

/// f(W, x), neurons accumulated in index order. Throws DimensionError or
/// NonFiniteError.
double forward(const Network& net, std::span<const double> x);

/// The 2^k-neuron network whose rows enumerate {-1,+1}^k on the support of
/// `task` (zeros elsewhere) with a_r = prod of the row's signs. Row r uses
/// pattern bits of r in the same lexicographic order as hypercube_point.
Network construct_good_network(const ParityTask& task);
/// Canonical support {0..k-1}, padded with zero columns up to d (d >= k).
Network construct_good_network(int k, int d);
inline Network construct_good_network(int k) { return construct_good_network(k, k); }

/// y * f(W, x).
double margin(const Network& net, const Sample& sample);

/// Sign pattern of the support coordinates packed as a bitmask: bit i is set
/// when the weight on support()[i] is negative.
using SignPattern = std::uint32_t;

std::vector<int> decode_pattern(SignPattern pattern, int k);

struct NeuronTaxonomy {
  std::vector<int> good;
  std::vector<int> bad;
  std::vector<bool> is_good;  // indexed by neuron
  std::map<SignPattern, std::vector<int>> sign_groups;
  std::vector<SignPattern> pattern_of;  // indexed by neuron
  double alpha = 0.0;
  double delta = 0.0;
};

/// Concentration radius sqrt(3 * 2^(k+1) * log(2^(k+2)/delta) / m).
double concentration_radius(int m, int k, double delta);

/// Good neurons satisfy a_r = prod_{j in A} sign(w_rj). Must be given the
/// t = 0 network. Throws RangeError on a zero feature weight.
NeuronTaxonomy classify_neurons(const Network& net_at_init,
                                const ParityTask& task, double delta = 0.05);

struct ExactEvaluation {};
struct MonteCarloEvaluation {
  std::size_t samples = 100000;
  std::uint64_t seed = 0;
};
using EvaluationMode = std::variant<ExactEvaluation, MonteCarloEvaluation>;

/// Fraction of inputs with sign(f) == y; f == 0 counts as an error. Exact
/// mode enumerates the hypercube (d <= 24) and shards across
/// `workers` threads.
double test_accuracy(const Network& net, const ParityTask& task,
                     const EvaluationMode& mode = ExactEvaluation{},
                     unsigned workers = 0);

/// Text format: header `m d k mode`, m rows of d weights, one row of m
/// second-layer values; %.17g.
void write_network(std::ostream& out, const Network& net);
Network read_network(std::istream& in);

}  // namespace sparity

namespace sparity {

/// Calls fn(index, y, f) for every hypercube index in [begin, end), walking
/// in increasing order (or decreasing when `reversed`). Inner products are
/// maintained as per-coordinate prefix sums so that only the coordinates
/// flipped between consecutive indices are re-added; the result is
/// bit-identical to forward().
template <typename Fn>
void for_each_output(const Network& net, const ParityTask& task,
                     std::uint64_t begin, std::uint64_t end, Fn&& fn,
                     bool reversed = false);

}  // namespace sparity

#include "sparity/detail/hypercube_walk.hpp"
