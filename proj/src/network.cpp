#include "sparity/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

#include "sparity/detail/shards.hpp"

namespace sparity {

std::string to_string(SecondLayerMode mode) {
  return mode == SecondLayerMode::fixed ? "fixed" : "trainable";
}

SecondLayerMode parse_second_layer_mode(const std::string& text) {
  if (text == "fixed") return SecondLayerMode::fixed;
  if (text == "trainable") return SecondLayerMode::trainable;
  throw RangeError("unknown second-layer mode '" + text + "'");
}

Network::Network(int m, int d, int k, std::vector<double> weights,
                 std::vector<double> second_layer, SecondLayerMode mode)
    : m_(m), d_(d), k_(k), w_(std::move(weights)), a_(std::move(second_layer)),
      mode_(mode) {
  if (m_ < 1 || d_ < 1 || k_ < 1)
    throw RangeError("network: m, d and k must be >= 1");
  if (w_.size() != static_cast<std::size_t>(m_) * d_)
    throw DimensionError("network: weight matrix must hold m*d entries");
  if (a_.size() != static_cast<std::size_t>(m_))
    throw DimensionError("network: second layer must hold m entries");
  for (double v : w_)
    if (!std::isfinite(v)) throw NonFiniteError("network: non-finite weight");
  for (double v : a_)
    if (!std::isfinite(v))
      throw NonFiniteError("network: non-finite second-layer weight");
  if (mode_ == SecondLayerMode::fixed)
    for (double v : a_)
      if (v != 1.0 && v != -1.0)
        throw RangeError("network: fixed second layer must be +-1");
}

double Network::activation(double z) const noexcept {
  double out = z;
  for (int i = 1; i < k_; ++i) out *= z;
  return out;
}

double Network::activation_derivative(double z) const noexcept {
  double out = static_cast<double>(k_);
  for (int i = 1; i < k_; ++i) out *= z;
  return out;
}

Network init_binary(int m, int d, int k, std::uint64_t seed) {
  if (m < 1 || d < 1 || k < 1)
    throw RangeError("init_binary: m, d and k must be >= 1");
  SignStream stream(seed);
  std::vector<double> w(static_cast<std::size_t>(m) * d);
  for (double& v : w) v = stream.next_sign();
  std::vector<double> a(static_cast<std::size_t>(m));
  for (double& v : a) v = stream.next_sign();
  return Network(m, d, k, std::move(w), std::move(a));
}

Network init_uniform(int m, int d, int k, std::uint64_t seed, double scale) {
  if (m < 1 || d < 1 || k < 1)
    throw RangeError("init_uniform: m, d and k must be >= 1");
  SignStream stream(seed);
  std::vector<double> w(static_cast<std::size_t>(m) * d);
  for (double& v : w) v = scale * (2.0 * stream.next_uniform() - 1.0);
  std::vector<double> a(static_cast<std::size_t>(m));
  for (double& v : a) v = stream.next_sign();
  return Network(m, d, k, std::move(w), std::move(a));
}

double preactivation(const Network& net, int r, std::span<const double> x) {
  const auto w = net.row(r);
  double s = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * x[j];
  return s;
}

double forward(const Network& net, std::span<const double> x) {
  if (static_cast<int>(x.size()) != net.dim())
    throw DimensionError("forward: expected " + std::to_string(net.dim()) +
                         " inputs, got " + std::to_string(x.size()));
  double f = 0.0;
  for (int r = 0; r < net.width(); ++r)
    f += net.output_weight(r) * net.activation(preactivation(net, r, x));
  if (!std::isfinite(f)) throw NonFiniteError("forward: non-finite output");
  return f;
}

Network construct_good_network(const ParityTask& task) {
  const int k = task.sparsity();
  if (k < 1 || k > 20) throw RangeError("good network: need 1 <= k <= 20");
  const int d = task.dim();
  const int m = 1 << k;
  std::vector<double> w(static_cast<std::size_t>(m) * d, 0.0);
  std::vector<double> a(static_cast<std::size_t>(m), 1.0);
  for (int r = 0; r < m; ++r) {
    for (int i = 0; i < k; ++i) {
      const double s = ((r >> (k - 1 - i)) & 1) ? -1.0 : 1.0;
      w[static_cast<std::size_t>(r) * d + task.support()[static_cast<std::size_t>(i)]] = s;
      a[static_cast<std::size_t>(r)] *= s;
    }
  }
  return Network(m, d, k, std::move(w), std::move(a));
}

Network construct_good_network(int k, int d) {
  if (k < 1 || k > 20) throw RangeError("good network: need 1 <= k <= 20");
  if (d < k) throw RangeError("good network: need d >= k");
  return construct_good_network(ParityTask::canonical(d, k));
}

double margin(const Network& net, const Sample& sample) {
  return sample.y * forward(net, sample.x);
}

std::vector<int> decode_pattern(SignPattern pattern, int k) {
  std::vector<int> signs(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i)
    signs[static_cast<std::size_t>(i)] = ((pattern >> i) & 1U) ? -1 : 1;
  return signs;
}

double concentration_radius(int m, int k, double delta) {
  const double groups = std::ldexp(1.0, k + 1);
  return std::sqrt(3.0 * groups * std::log(std::ldexp(1.0, k + 2) / delta) / m);
}

NeuronTaxonomy classify_neurons(const Network& net_at_init,
                                const ParityTask& task, double delta) {
  if (net_at_init.dim() != task.dim())
    throw DimensionError("classify_neurons: network and task dimensions differ");
  if (task.sparsity() > 31)
    throw RangeError("classify_neurons: k too large for sign patterns");
  NeuronTaxonomy tax;
  const int m = net_at_init.width();
  tax.is_good.assign(static_cast<std::size_t>(m), false);
  tax.pattern_of.assign(static_cast<std::size_t>(m), 0);
  for (int r = 0; r < m; ++r) {
    SignPattern pattern = 0;
    double product = 1.0;
    for (std::size_t i = 0; i < task.support().size(); ++i) {
      const double w = net_at_init.weight(r, task.support()[i]);
      if (w == 0.0)
        throw RangeError("classify_neurons: zero feature weight on neuron " +
                         std::to_string(r) + " (not an initial network?)");
      if (w < 0.0) {
        pattern |= SignPattern{1} << i;
        product = -product;
      }
    }
    const double a = net_at_init.output_weight(r);
    const bool good = (a > 0.0) == (product > 0.0) && a != 0.0;
    tax.is_good[static_cast<std::size_t>(r)] = good;
    tax.pattern_of[static_cast<std::size_t>(r)] = pattern;
    (good ? tax.good : tax.bad).push_back(r);
    tax.sign_groups[pattern].push_back(r);
  }
  tax.delta = delta;
  tax.alpha = concentration_radius(m, task.sparsity(), delta);
  return tax;
}

namespace {

std::uint64_t count_correct_exact(const Network& net, const ParityTask& task,
                                  unsigned workers) {
  require_enumerable(task.dim());
  const std::uint64_t total = std::uint64_t{1} << task.dim();
  std::vector<std::uint64_t> counts(detail::shard_count(total, workers), 0);
  detail::run_sharded(total, workers,
                      [&](unsigned s, std::uint64_t begin, std::uint64_t end) {
                        std::uint64_t correct = 0;
                        for_each_output(net, task, begin, end,
                                        [&](std::uint64_t, double y, double f) {
                                          if ((f > 0.0 && y > 0.0) ||
                                              (f < 0.0 && y < 0.0))
                                            ++correct;
                                        });
                        counts[s] = correct;
                      });
  std::uint64_t correct = 0;
  for (auto c : counts) correct += c;
  return correct;
}

}  // namespace

double test_accuracy(const Network& net, const ParityTask& task,
                     const EvaluationMode& mode, unsigned workers) {
  if (net.dim() != task.dim())
    throw DimensionError("test_accuracy: network and task dimensions differ");
  if (std::holds_alternative<ExactEvaluation>(mode)) {
    const std::uint64_t total = std::uint64_t{1} << task.dim();
    return static_cast<double>(count_correct_exact(net, task, workers)) /
           static_cast<double>(total);
  }
  const auto& mc = std::get<MonteCarloEvaluation>(mode);
  if (mc.samples == 0) throw RangeError("test_accuracy: need >= 1 sample");
  SignStream stream(mc.seed);
  std::vector<double> x(static_cast<std::size_t>(task.dim()));
  std::uint64_t correct = 0;
  for (std::size_t i = 0; i < mc.samples; ++i) {
    for (double& v : x) v = stream.next_sign();
    double y = 1.0;
    for (int j : task.support()) y *= x[static_cast<std::size_t>(j)];
    const double f = forward(net, x);
    if ((f > 0.0 && y > 0.0) || (f < 0.0 && y < 0.0)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(mc.samples);
}

void write_network(std::ostream& out, const Network& net) {
  char buf[40];
  out << net.width() << ' ' << net.dim() << ' ' << net.degree() << ' '
      << to_string(net.mode()) << '\n';
  for (int r = 0; r < net.width(); ++r) {
    for (int j = 0; j < net.dim(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", net.weight(r, j));
      out << (j ? " " : "") << buf;
    }
    out << '\n';
  }
  for (int r = 0; r < net.width(); ++r) {
    std::snprintf(buf, sizeof buf, "%.17g", net.output_weight(r));
    out << (r ? " " : "") << buf;
  }
  out << '\n';
}

Network read_network(std::istream& in) {
  int m = 0, d = 0, k = 0;
  std::string mode;
  if (!(in >> m >> d >> k >> mode))
    throw Error("read_network: malformed header (expected `m d k mode`)");
  if (m < 1 || d < 1 || k < 1) throw RangeError("read_network: bad header sizes");
  std::vector<double> w(static_cast<std::size_t>(m) * d);
  for (double& v : w)
    if (!(in >> v)) throw Error("read_network: truncated weight matrix");
  std::vector<double> a(static_cast<std::size_t>(m));
  for (double& v : a)
    if (!(in >> v)) throw Error("read_network: truncated second layer");
  return Network(m, d, k, std::move(w), std::move(a),
                 parse_second_layer_mode(mode));
}

}  // namespace sparity
