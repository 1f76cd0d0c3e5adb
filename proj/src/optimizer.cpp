#include "sparity/optimizer.hpp"

#include <cmath>
#include <sstream>

#include "sparity/detail/shards.hpp"

namespace sparity {

std::string to_string(SecondLayerStatistic s) {
  return s == SecondLayerStatistic::with_label ? "with_label" : "without_label";
}

SecondLayerStatistic parse_second_layer_statistic(const std::string& text) {
  if (text == "with_label") return SecondLayerStatistic::with_label;
  if (text == "without_label") return SecondLayerStatistic::without_label;
  throw RangeError("unknown second-layer statistic '" + text + "'");
}

std::string to_string(TrainMode mode) {
  return mode == TrainMode::stochastic ? "stochastic" : "population";
}

TrainMode parse_train_mode(const std::string& text) {
  if (text == "stochastic") return TrainMode::stochastic;
  if (text == "population") return TrainMode::population;
  throw RangeError("unknown training mode '" + text + "'");
}

void TrainConfig::validate() const {
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw RangeError("eta must be >= 0");
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw RangeError("lambda must be >= 0");
  if (!(eta * lambda < 1.0)) throw RangeError("eta * lambda must be < 1");
  if (!(rho > 0.0) || !std::isfinite(rho)) throw RangeError("rho must be > 0");
  if (batch_size < 1) throw RangeError("batch_size must be >= 1");
  if (iterations < 0) throw RangeError("iterations must be >= 0");
  if (!(eta2 >= 0.0) || !std::isfinite(eta2)) throw RangeError("eta2 must be >= 0");
  if (!(delta > 0.0 && delta < 1.0)) throw RangeError("delta must lie in (0, 1)");
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw RangeError("epsilon must lie in (0, 1)");
}

int tilde_sign(double x, double rho) {
  if (!std::isfinite(x)) throw NonFiniteError("tilde_sign: non-finite input");
  if (!(rho > 0.0)) throw RangeError("tilde_sign: rho must be > 0");
  if (x >= rho) return 1;
  if (x <= -rho) return -1;
  return 0;
}

double factorial(int n) {
  double out = 1.0;
  for (int i = 2; i <= n; ++i) out *= i;
  return out;
}

GradientEstimate batch_gradient(const Network& net, const Batch& batch,
                                bool with_second_layer,
                                SecondLayerStatistic statistic) {
  if (batch.size() == 0) throw RangeError("batch_gradient: empty batch");
  if (batch.d != net.dim())
    throw DimensionError("batch_gradient: batch and network dimensions differ");
  const int m = net.width();
  const int d = net.dim();
  GradientEstimate g{m, d, std::vector<double>(static_cast<std::size_t>(m) * d, 0.0), {}};
  if (with_second_layer) g.second.assign(static_cast<std::size_t>(m), 0.0);

  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto x = batch.input(i);
    const double y = batch.y[i];
    for (int r = 0; r < m; ++r) {
      const double z = preactivation(net, r, x);
      const double coef = net.activation_derivative(z) * net.output_weight(r) * y;
      double* gr = g.first.data() + static_cast<std::size_t>(r) * d;
      for (int j = 0; j < d; ++j) gr[j] += coef * x[static_cast<std::size_t>(j)];
      if (with_second_layer) {
        const double s = net.activation(z);
        g.second[static_cast<std::size_t>(r)] +=
            statistic == SecondLayerStatistic::with_label ? y * s : s;
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (double& v : g.first) v *= inv;
  for (double& v : g.second) v *= inv;
  for (double v : g.first)
    if (!std::isfinite(v)) throw NonFiniteError("batch_gradient: non-finite value");
  return g;
}

double hypercube_moment(std::span<const double> w, int n) {
  // moments[p] = E[S^p] for the running partial sum S.
  std::vector<double> moments(static_cast<std::size_t>(n) + 1, 0.0);
  moments[0] = 1.0;
  std::vector<double> next(moments.size());
  for (double wj : w) {
    for (int p = 0; p <= n; ++p) {
      double acc = 0.0;
      double binom = 1.0;  // C(p, l)
      double power = 1.0;  // wj^l
      for (int l = 0; l <= p; ++l) {
        if (l % 2 == 0) acc += binom * power * moments[static_cast<std::size_t>(p - l)];
        binom = binom * (p - l) / (l + 1);
        power *= wj;
      }
      next[static_cast<std::size_t>(p)] = acc;
    }
    moments.swap(next);
  }
  return moments[static_cast<std::size_t>(n)];
}

GradientEstimate population_gradient(const Network& net, const ParityTask& task,
                                     bool with_second_layer,
                                     SecondLayerStatistic statistic) {
  if (net.dim() != task.dim())
    throw DimensionError("population_gradient: network and task dimensions differ");
  const int m = net.width();
  const int d = net.dim();
  const int k = net.degree();
  if (k != task.sparsity())
    throw RangeError("population_gradient: activation degree must equal k");
  const double kfact = factorial(k);
  const auto& support = task.support();
  GradientEstimate g{m, d, std::vector<double>(static_cast<std::size_t>(m) * d, 0.0), {}};
  if (with_second_layer) g.second.assign(static_cast<std::size_t>(m), 0.0);
  for (int r = 0; r < m; ++r) {
    for (std::size_t i = 0; i < support.size(); ++i) {
      double prod = 1.0;
      for (std::size_t l = 0; l < support.size(); ++l)
        if (l != i) prod *= net.weight(r, support[l]);
      g.first[static_cast<std::size_t>(r) * d + support[i]] =
          kfact * net.output_weight(r) * prod;
    }
    if (with_second_layer) {
      if (statistic == SecondLayerStatistic::with_label) {
        double prod = 1.0;
        for (int j : support) prod *= net.weight(r, j);
        g.second[static_cast<std::size_t>(r)] = kfact * prod;
      } else {
        g.second[static_cast<std::size_t>(r)] = hypercube_moment(net.row(r), k);
      }
    }
  }
  for (double v : g.first)
    if (!std::isfinite(v))
      throw NonFiniteError("population_gradient: non-finite weights");
  return g;
}

Network sgd_step(const Network& net, const GradientEstimate& grad,
                 const TrainConfig& cfg) {
  if (grad.m != net.width() || grad.d != net.dim())
    throw DimensionError("sgd_step: gradient shape does not match network");
  const double decay = 1.0 - cfg.lambda * cfg.eta;
  std::vector<double> w = net.weights();
  for (std::size_t i = 0; i < w.size(); ++i)
    w[i] = decay * w[i] + cfg.eta * tilde_sign(grad.first[i], cfg.rho);
  std::vector<double> a = net.second_layer();
  SecondLayerMode mode = net.mode();
  if (cfg.eta2 > 0.0 && grad.has_second()) {
    mode = SecondLayerMode::trainable;
    for (std::size_t r = 0; r < a.size(); ++r)
      a[r] += cfg.eta2 * tilde_sign(grad.second[r], cfg.rho);
  }
  for (double v : w)
    if (!std::isfinite(v)) throw NonFiniteError("sgd_step: non-finite update");
  return Network(net.width(), net.dim(), net.degree(), std::move(w), std::move(a),
                 mode);
}

std::uint64_t batch_seed(std::uint64_t seed, int step) {
  return derive_seed(seed, StreamDomain::batch, static_cast<std::uint64_t>(step));
}

Network run_training(const ParityTask& task, const Network& net0,
                     const TrainConfig& cfg, TrainMode mode, StepObserver* observer) {
  cfg.validate();
  if (net0.dim() != task.dim())
    throw DimensionError("train: network and task dimensions differ");
  const bool second = cfg.trains_second_layer();
  Network net = net0;
  if (second) net.set_mode(SecondLayerMode::trainable);
  for (int t = 0; t < cfg.iterations; ++t) {
    GradientEstimate grad;
    if (mode == TrainMode::stochastic) {
      SignStream stream(batch_seed(cfg.seed, t));
      const Batch batch = sample_batch(task, cfg.batch_size, stream);
      grad = batch_gradient(net, batch, second, cfg.second_layer_statistic);
    } else {
      grad = population_gradient(net, task, second, cfg.second_layer_statistic);
    }
    if (observer) observer->observe(t, net, &grad);
    net = sgd_step(net, grad, cfg);
  }
  if (observer) observer->observe(cfg.iterations, net, nullptr);
  return net;
}

TrainOutcome train(const ParityTask& task, const Network& net0,
                   const TrainConfig& cfg, TrainMode mode, StepObserver* observer,
                   unsigned eval_workers) {
  Network net = run_training(task, net0, cfg, mode, observer);
  TrainSummary summary = summarize(task, net0, net, cfg, eval_workers);
  if (mode == TrainMode::population) summary.samples_consumed = 0;
  return TrainOutcome{std::move(net), summary};
}

TrainSummary summarize(const ParityTask& task, const Network& net0,
                       const Network& trained, const TrainConfig& cfg,
                       unsigned eval_workers) {
  TrainSummary s;
  const int k = task.sparsity();
  s.margin_threshold = 0.25 * factorial(k) * trained.width();
  s.samples_consumed =
      static_cast<std::uint64_t>(cfg.batch_size) * static_cast<std::uint64_t>(cfg.iterations);

  if (task.dim() <= kMaxEnumerationDim) {
    const std::uint64_t total = std::uint64_t{1} << task.dim();
    const unsigned shards = detail::shard_count(total, eval_workers);
    std::vector<std::uint64_t> correct(shards, 0), above(shards, 0);
    detail::run_sharded(total, eval_workers,
                        [&](unsigned sh, std::uint64_t begin, std::uint64_t end) {
                          for_each_output(trained, task, begin, end,
                                          [&](std::uint64_t, double y, double f) {
                                            if ((f > 0.0 && y > 0.0) ||
                                                (f < 0.0 && y < 0.0))
                                              ++correct[sh];
                                            if (y * f >= s.margin_threshold) ++above[sh];
                                          });
                        });
    std::uint64_t c = 0, a = 0;
    for (unsigned sh = 0; sh < shards; ++sh) {
      c += correct[sh];
      a += above[sh];
    }
    s.test_accuracy = static_cast<double>(c) / static_cast<double>(total);
    s.margin_fraction = static_cast<double>(a) / static_cast<double>(total);
    s.accuracy_exact = true;
  } else {
    const MonteCarloEvaluation mc{100000, derive_seed(cfg.seed, StreamDomain::evaluation, 0)};
    SignStream stream(mc.seed);
    std::vector<double> x(static_cast<std::size_t>(task.dim()));
    std::uint64_t c = 0, a = 0;
    for (std::size_t i = 0; i < mc.samples; ++i) {
      for (double& v : x) v = stream.next_sign();
      double y = 1.0;
      for (int j : task.support()) y *= x[static_cast<std::size_t>(j)];
      const double f = forward(trained, x);
      if ((f > 0.0 && y > 0.0) || (f < 0.0 && y < 0.0)) ++c;
      if (y * f >= s.margin_threshold) ++a;
    }
    s.test_accuracy = static_cast<double>(c) / static_cast<double>(mc.samples);
    s.margin_fraction = static_cast<double>(a) / static_cast<double>(mc.samples);
    s.accuracy_exact = false;
  }

  const NeuronTaxonomy tax = classify_neurons(net0, task, cfg.delta);
  s.neurons.good = static_cast<int>(tax.good.size());
  s.neurons.bad = static_cast<int>(tax.bad.size());
  double min_feature = tax.good.empty() ? 0.0 : INFINITY;
  for (int r = 0; r < trained.width(); ++r) {
    for (int j = 0; j < trained.dim(); ++j) {
      const double v = std::abs(trained.weight(r, j));
      if (!tax.is_good[static_cast<std::size_t>(r)]) {
        s.neurons.max_bad_coordinate = std::max(s.neurons.max_bad_coordinate, v);
      } else if (task.is_feature(j)) {
        min_feature = std::min(min_feature, v);
      } else {
        s.neurons.max_good_noise = std::max(s.neurons.max_good_noise, v);
      }
    }
  }
  s.neurons.min_good_feature = min_feature;
  return s;
}

std::vector<std::string> validate_condition(const ParityTask& task, int m,
                                            const TrainConfig& cfg) {
  constexpr double C = 1.0;
  std::vector<std::string> warnings;
  const int k = task.sparsity();
  const double d = task.dim();
  const double delta = cfg.delta;
  const double eps = cfg.epsilon;
  const double B = static_cast<double>(cfg.batch_size);
  const double T = std::max(1, cfg.iterations);
  auto fmt = [](double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
  };

  const double m_min = C * std::pow(5.0, k) * std::log(1.0 / delta);
  if (m < m_min)
    warnings.push_back("width: m = " + std::to_string(m) + " < 5^k log(1/delta) = " +
                       fmt(m_min));
  const double d_min = C * std::pow(std::log(2.0 * m / eps), 2);
  if (d < d_min)
    warnings.push_back("dimension: d = " + fmt(d) + " < log^2(2m/epsilon) = " + fmt(d_min));
  const double km1_fact = factorial(k - 1);
  const double B_min = C * std::pow(2.0, k) / (km1_fact * km1_fact) * std::pow(d, k - 1) *
                       std::pow(std::log(16.0 * m * d * B * T / delta), k - 1) *
                       std::pow(std::log(8.0 * m * d * T / delta), 2);
  if (B < B_min)
    warnings.push_back("batch size: B = " + fmt(B) + " < " + fmt(B_min));
  if (cfg.eta > 1.0 / C)
    warnings.push_back("step size: eta = " + fmt(cfg.eta) + " > 1/C = " + fmt(1.0 / C));
  if (cfg.lambda != 1.0)
    warnings.push_back("weight decay: lambda = " + fmt(cfg.lambda) + " != 1");
  const double rho_ref = 0.1 * factorial(k);
  if (std::abs(cfg.rho - rho_ref) > 1e-12 * rho_ref)
    warnings.push_back("threshold: rho = " + fmt(cfg.rho) + " != 0.1 k! = " + fmt(rho_ref));
  return warnings;
}

}  // namespace sparity
