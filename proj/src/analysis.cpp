#include "sparity/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>

#include "sparity/exact_sum.hpp"

namespace sparity {

// ---------------------------------------------------------------------------
// TrajectoryTrace

TrajectoryTrace::TrajectoryTrace(ParityTask task, double rho, TraceOptions options)
    : task_(std::move(task)), rho_(rho), options_(std::move(options)) {}

const NeuronTaxonomy& TrajectoryTrace::taxonomy() const {
  if (taxonomy_.empty()) throw Error("trajectory trace: nothing recorded yet");
  return taxonomy_.front();
}

void TrajectoryTrace::observe(int step, const Network& weights,
                              const GradientEstimate* gradient) {
  if (!steps_.empty() && step <= steps_.back().step)
    throw Error("trajectory trace: step indices must increase");
  if (weights.dim() != task_.dim())
    throw DimensionError("trajectory trace: network and task dimensions differ");
  if (taxonomy_.empty()) {
    taxonomy_.push_back(classify_neurons(weights, task_));
    if (options_.full) {
      neurons_.resize(static_cast<std::size_t>(weights.width()));
      for (int r = 0; r < weights.width(); ++r) neurons_[static_cast<std::size_t>(r)] = r;
    } else {
      for (int r : options_.neurons)
        if (r < 0 || r >= weights.width())
          throw RangeError("trajectory trace: neuron index out of range");
      neurons_ = options_.neurons;
    }
  }
  const NeuronTaxonomy& tax = taxonomy_.front();

  TraceStep rec;
  rec.step = step;
  rec.second_layer = weights.second_layer();
  for (int r : neurons_) {
    const auto row = weights.row(r);
    rec.weights.emplace_back(row.begin(), row.end());
  }
  for (int r = 0; r < weights.width(); ++r) {
    for (int j = 0; j < weights.dim(); ++j) {
      const double v = std::abs(weights.weight(r, j));
      if (!tax.is_good[static_cast<std::size_t>(r)])
        rec.max_bad_coordinate = std::max(rec.max_bad_coordinate, v);
      else if (!task_.is_feature(j))
        rec.max_good_noise = std::max(rec.max_good_noise, v);
    }
  }
  if (gradient) {
    const int d = weights.dim();
    for (int r : neurons_) {
      std::vector<int> signs(static_cast<std::size_t>(d));
      for (int j = 0; j < d; ++j)
        signs[static_cast<std::size_t>(j)] = tilde_sign(gradient->at(r, j), rho_);
      rec.sign_applied.push_back(std::move(signs));
    }
    if (options_.population_signs) {
      const GradientEstimate pop = population_gradient(weights, task_);
      std::size_t agree = 0;
      for (std::size_t i = 0; i < pop.first.size(); ++i)
        if (tilde_sign(pop.first[i], rho_) == tilde_sign(gradient->first[i], rho_)) ++agree;
      rec.agreement = static_cast<double>(agree) / static_cast<double>(pop.first.size());
      for (int r : neurons_) {
        std::vector<int> signs(static_cast<std::size_t>(d));
        for (int j = 0; j < d; ++j)
          signs[static_cast<std::size_t>(j)] = tilde_sign(pop.at(r, j), rho_);
        rec.sign_population.push_back(std::move(signs));
      }
    }
  }
  steps_.push_back(std::move(rec));
}

namespace {

void write_value(std::ostream& out, int t, int neuron, int coord, double value,
                 const char* kind) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  out << t << ',' << neuron << ',';
  if (coord >= 0) out << coord;
  out << ',' << buf << ',' << kind << '\n';
}

}  // namespace

void TrajectoryTrace::write_csv(std::ostream& out) const { write_csv(out, -1); }

void TrajectoryTrace::write_csv(std::ostream& out, int neuron) const {
  out << "t,neuron,coord,value,kind\n";
  for (const TraceStep& s : steps_) {
    for (std::size_t n = 0; n < neurons_.size(); ++n) {
      const int r = neurons_[n];
      if (neuron >= 0 && r != neuron) continue;
      for (std::size_t j = 0; j < s.weights[n].size(); ++j)
        write_value(out, s.step, r, static_cast<int>(j), s.weights[n][j], "weight");
      write_value(out, s.step, r, -1, s.second_layer[static_cast<std::size_t>(r)], "a");
      if (!s.sign_applied.empty())
        for (std::size_t j = 0; j < s.sign_applied[n].size(); ++j)
          write_value(out, s.step, r, static_cast<int>(j), s.sign_applied[n][j],
                      "sign_stoch");
      if (!s.sign_population.empty())
        for (std::size_t j = 0; j < s.sign_population[n].size(); ++j)
          write_value(out, s.step, r, static_cast<int>(j), s.sign_population[n][j],
                      "sign_pop");
    }
  }
}

// ---------------------------------------------------------------------------
// Population dynamics

int required_population_iterations(int k, int d, double eta, double lambda) {
  if (!(eta * lambda > 0.0))
    throw RangeError("required iterations: eta * lambda must be > 0");
  return static_cast<int>(std::ceil((k + 1) / (eta * lambda) * std::log(static_cast<double>(d))));
}

PopulationDynamicsReport check_population_dynamics(const ParityTask& task,
                                                   const Network& net0,
                                                   const TrainConfig& cfg, int T) {
  PopulationDynamicsReport rep;
  rep.iterations = T;
  const int k = task.sparsity();
  const int d = task.dim();
  const double kfact = factorial(k);
  const double decay = 1.0 - cfg.eta * cfg.lambda;

  if (cfg.lambda != 1.0) rep.precondition_violations.push_back("lambda != 1");
  if (!(cfg.rho < kfact)) rep.precondition_violations.push_back("rho >= k!");
  if (k >= 2 && !(cfg.eta / decay < std::pow(cfg.rho / kfact, 1.0 / (k - 1))))
    rep.precondition_violations.push_back(
        "eta / (1 - eta lambda) >= (rho / k!)^(1/(k-1))");
  for (double v : net0.weights())
    if (v != 1.0 && v != -1.0) {
      rep.precondition_violations.push_back("first layer is not a binary initialization");
      break;
    }
  rep.required_iterations =
      cfg.eta * cfg.lambda > 0.0 ? required_population_iterations(k, d, cfg.eta, cfg.lambda)
                                 : -1;

  const NeuronTaxonomy tax = classify_neurons(net0, task, cfg.delta);
  TrainConfig step_cfg = cfg;
  step_cfg.eta2 = 0.0;

  rep.good_features_frozen = {"good feature coordinates frozen", true, 0.0, ""};
  rep.bad_features_contract = {"bad feature coordinates contract", true, INFINITY, ""};
  rep.noise_geometric_decay = {"noise coordinates decay geometrically", true, 0.0, ""};
  double max_good_drift = 0.0;
  double max_noise_error = 0.0;

  // Expected noise trajectory by repeated multiplication, matching sgd_step.
  std::vector<double> expected_noise = net0.weights();

  Network net = net0;
  for (int t = 0; t < T; ++t) {
    const GradientEstimate g = population_gradient(net, task);
    Network next = sgd_step(net, g, step_cfg);
    for (int r = 0; r < net.width(); ++r) {
      const bool good = tax.is_good[static_cast<std::size_t>(r)];
      double common = NAN;
      for (int j : task.support()) {
        const double s = net0.weight(r, j) > 0.0 ? 1.0 : -1.0;
        const double now = s * net.weight(r, j);
        const double after = s * next.weight(r, j);
        if (good) {
          max_good_drift = std::max(max_good_drift, std::abs(after - s * net0.weight(r, j)));
        } else {
          const double positivity = after;
          const double contraction = decay * now - after;
          rep.bad_features_contract.slack =
              std::min({rep.bad_features_contract.slack, positivity, contraction});
          if (!(after > 0.0) || !(after <= decay * now)) rep.bad_features_contract.passed = false;
          if (std::isnan(common)) common = after;
          else if (after != common) {
            rep.bad_features_contract.passed = false;
            rep.bad_features_contract.detail = "feature magnitudes diverged";
          }
        }
      }
      for (int j = 0; j < d; ++j) {
        if (task.is_feature(j)) continue;
        double& e = expected_noise[static_cast<std::size_t>(r) * d + j];
        e = decay * e;
        max_noise_error = std::max(max_noise_error, std::abs(next.weight(r, j) - e));
      }
    }
    net = std::move(next);
  }
  rep.good_features_frozen.passed = max_good_drift == 0.0;
  rep.good_features_frozen.slack = -max_good_drift;
  if (tax.bad.empty() || T == 0) rep.bad_features_contract.slack = 0.0;
  rep.noise_geometric_decay.passed = max_noise_error == 0.0;
  rep.noise_geometric_decay.slack = -max_noise_error;

  const double threshold = std::pow(static_cast<double>(d), -(k + 1));
  double worst = 0.0;
  for (int r = 0; r < net.width(); ++r)
    for (int j = 0; j < d; ++j)
      if (!tax.is_good[static_cast<std::size_t>(r)] || !task.is_feature(j))
        worst = std::max(worst, std::abs(net.weight(r, j)));
  rep.final_magnitudes = {"final bad / noise magnitudes <= d^-(k+1)", worst <= threshold,
                          threshold - worst, ""};
  if (rep.required_iterations >= 0 && T < rep.required_iterations)
    rep.final_magnitudes.detail = "T below the required iteration count";
  return rep;
}

// ---------------------------------------------------------------------------
// Gradient concentration

double gradient_gap_bound(int k, int d, int m, std::size_t B, int T, double delta) {
  const double b = static_cast<double>(B);
  const double t = std::max(1, T);
  const double first = std::pow(2.0, k / 2.0) * k *
                       std::pow(std::log(16.0 * m * d * b * t / delta), (k - 1) / 2.0) *
                       std::log(8.0 * m * d * t / delta) / std::sqrt(b);
  const double second = k * std::pow(static_cast<double>(d), (k - 3) / 2.0) * delta /
                        (8.0 * m * b * t);
  return first + second;
}

double normalized_gap(const Network& net, const GradientEstimate& lhs,
                      const GradientEstimate& rhs) {
  const int k = net.degree();
  double worst = 0.0;
  for (int r = 0; r < net.width(); ++r) {
    double norm2 = 0.0;
    for (double v : net.row(r)) norm2 += v * v;
    const double scale = std::pow(std::sqrt(norm2), k - 1);
    if (scale == 0.0) continue;
    for (int j = 0; j < net.dim(); ++j)
      worst = std::max(worst, std::abs(lhs.at(r, j) - rhs.at(r, j)) / scale);
  }
  return worst;
}

GradientGapReport measure_gradient_gap(const ParityTask& task, const Network& net,
                                       const TrainConfig& cfg, int n_batches,
                                       std::uint64_t stream_seed) {
  if (n_batches < 1) throw RangeError("measure_gradient_gap: n_batches must be >= 1");
  GradientGapReport rep;
  rep.epsilon1 = gradient_gap_bound(task.sparsity(), task.dim(), net.width(),
                                    cfg.batch_size, cfg.iterations, cfg.delta);
  const GradientEstimate pop = population_gradient(net, task);
  int within = 0;
  for (int i = 0; i < n_batches; ++i) {
    SignStream stream(derive_seed(stream_seed, StreamDomain::probe, static_cast<std::uint64_t>(i)));
    const Batch batch = sample_batch(task, cfg.batch_size, stream);
    const GradientEstimate g = batch_gradient(net, batch);
    const double gap = normalized_gap(net, pop, g);
    rep.gaps.push_back(gap);
    if (gap <= rep.epsilon1) ++within;
    std::size_t agree = 0;
    for (std::size_t e = 0; e < g.first.size(); ++e)
      if (tilde_sign(g.first[e], cfg.rho) == tilde_sign(pop.first[e], cfg.rho)) ++agree;
    rep.agreement.push_back(static_cast<double>(agree) / static_cast<double>(g.first.size()));
  }
  std::vector<double> sorted = rep.gaps;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  rep.median_gap = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  rep.max_gap = sorted.back();
  rep.fraction_within_bound = static_cast<double>(within) / n_batches;
  return rep;
}

SignAgreementReport sign_agreement(const ParityTask& task, const Network& net0,
                                   const TrainConfig& cfg, TrainMode reference) {
  TraceOptions opts;
  opts.neurons = {};
  opts.population_signs = true;
  TrajectoryTrace trace(task, cfg.rho, opts);
  TrainConfig first_layer_only = cfg;
  first_layer_only.eta2 = 0.0;
  SignAgreementReport rep{{}, true, 1.0, run_training(task, net0, first_layer_only, reference, &trace)};
  double sum = 0.0;
  for (const TraceStep& s : trace.steps()) {
    if (s.step >= cfg.iterations) continue;
    rep.per_step.push_back(s.agreement);
    sum += s.agreement;
    if (s.agreement < 1.0) rep.all_agree = false;
  }
  rep.mean = rep.per_step.empty() ? 1.0 : sum / static_cast<double>(rep.per_step.size());
  return rep;
}

double approximation_ratio(const Network& trained, const ParityTask& task) {
  require_enumerable(task.dim());
  if (trained.degree() != task.sparsity())
    throw RangeError("approximation_ratio: activation degree must equal k");
  const Network good = construct_good_network(task);
  const std::uint64_t total = std::uint64_t{1} << task.dim();
  std::vector<double> reference(static_cast<std::size_t>(total));
  const double scale = std::ldexp(static_cast<double>(trained.width()), -(task.sparsity() + 1));
  for_each_output(good, task, 0, total, [&](std::uint64_t i, double, double f) {
    reference[static_cast<std::size_t>(i)] = scale * f;
  });
  std::uint64_t inside = 0;
  for_each_output(trained, task, 0, total, [&](std::uint64_t i, double, double f) {
    const double ratio = f / reference[static_cast<std::size_t>(i)];
    if (ratio >= 0.5 && ratio <= 1.5) ++inside;
  });
  return static_cast<double>(inside) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------
// Second layer

double second_layer_drift_constant(int k) {
  const double cosh1 = (std::numbers::e + 1.0 / std::numbers::e) / 2.0;
  return 0.25 * std::sqrt(std::numbers::pi * k / 8.0) * std::pow(cosh1, -k);
}

DriftReport second_layer_drift(const TrajectoryTrace& trace, double eta2, int T, int k) {
  if (trace.empty() || trace.steps().front().second_layer.empty())
    throw Error("second_layer_drift: trace holds no second-layer values");
  DriftReport rep;
  rep.step_bound = eta2 * T;
  rep.constant = second_layer_drift_constant(k);
  rep.constant_applies = eta2 <= rep.constant / T;
  const auto& a0 = trace.steps().front().second_layer;
  for (const TraceStep& s : trace.steps()) {
    if (s.step > T) break;
    double drift = 0.0;
    for (std::size_t r = 0; r < a0.size(); ++r) {
      drift = std::max(drift, std::abs(s.second_layer[r] - a0[r]));
      if ((s.second_layer[r] > 0.0) != (a0[r] > 0.0) || s.second_layer[r] == 0.0)
        rep.signs_preserved = false;
    }
    // Each step adds +-eta2 or 0; allow one rounding unit of |a| <= 2 per step.
    const double rounding = s.step * std::ldexp(1.0, -51);
    if (drift > eta2 * s.step + rounding) rep.within_step_bound = false;
    rep.max_drift = std::max(rep.max_drift, drift);
  }
  rep.within_constant = rep.max_drift <= rep.constant;
  return rep;
}

// ---------------------------------------------------------------------------
// Combinatorial identities

namespace {

using i128 = __int128;

i128 checked_mul(i128 a, i128 b) {
  i128 out;
  if (__builtin_mul_overflow(a, b, &out)) throw RangeError("identity: integer overflow");
  return out;
}

i128 checked_add(i128 a, i128 b) {
  i128 out;
  if (__builtin_add_overflow(a, b, &out)) throw RangeError("identity: integer overflow");
  return out;
}

std::int64_t narrow(i128 v) {
  if (v > INT64_MAX || v < INT64_MIN) throw RangeError("identity: result exceeds 64 bits");
  return static_cast<std::int64_t>(v);
}

}  // namespace

IntegerIdentity identity_F2(int k) {
  if (k < 1 || k > 15) throw RangeError("identity_F2: need 1 <= k <= 15");
  i128 lhs = 0;
  i128 binom = 1;
  for (int i = 0; i <= k; ++i) {
    i128 power = 1;
    for (int p = 0; p < k; ++p) power = checked_mul(power, k - 2 * i);
    i128 term = checked_mul(binom, power);
    if (i % 2) term = -term;
    lhs = checked_add(lhs, term);
    binom = binom * (k - i) / (i + 1);
  }
  i128 rhs = i128{1} << k;
  for (int i = 2; i <= k; ++i) rhs = checked_mul(rhs, i);
  return {narrow(lhs), narrow(rhs)};
}

RealBound bound_F3(int k) {
  if (k < 1 || k > 30) throw RangeError("bound_F3: need 1 <= k <= 30");
  // Exact integer terms while they fit in 128 bits, floating point beyond.
  i128 exact = 0;
  bool fits = true;
  i128 binom = 1;
  for (int i = 0; i <= k && fits; ++i) {
    try {
      i128 power = 1;
      for (int p = 0; p < k; ++p) power = checked_mul(power, std::abs(k - 2 * i));
      exact = checked_add(exact, checked_mul(binom, power));
    } catch (const RangeError&) {
      fits = false;
    }
    binom = binom * (k - i) / (i + 1);
  }
  double lhs = 0.0;
  if (fits) {
    lhs = static_cast<double>(exact);
  } else {
    ExactSum sum;
    double b = 1.0;
    for (int i = 0; i <= k; ++i) {
      sum.add(b * std::pow(static_cast<double>(std::abs(k - 2 * i)), k));
      b = b * (k - i) / (i + 1);
    }
    lhs = sum.value();
  }
  const double log_rhs = std::log(2.0) + k * std::log(static_cast<double>(k)) +
                         k * std::log1p(std::exp(-2.0));
  return {lhs, std::exp(log_rhs)};
}

// ---------------------------------------------------------------------------
// Group sizes

bool group_sizes_within(const NeuronTaxonomy& taxonomy, int m, int k, double alpha) {
  const double expected = std::ldexp(static_cast<double>(m), -(k + 1));
  const double lo = (1.0 - alpha) * expected;
  const double hi = (1.0 + alpha) * expected;
  const SignPattern patterns = SignPattern{1} << k;
  for (SignPattern p = 0; p < patterns; ++p) {
    int good = 0, bad = 0;
    if (auto it = taxonomy.sign_groups.find(p); it != taxonomy.sign_groups.end())
      for (int r : it->second) (taxonomy.is_good[static_cast<std::size_t>(r)] ? good : bad)++;
    if (good < lo || good > hi || bad < lo || bad > hi) return false;
  }
  return true;
}

GroupSizeReport group_size_check(int m, int k, int n_seeds, double delta,
                                 std::uint64_t master_seed) {
  if (k < 1 || k > 20) throw RangeError("group_size_check: need 1 <= k <= 20");
  if (n_seeds < 1) throw RangeError("group_size_check: need >= 1 seed");
  if (m < (1 << (k + 1))) throw RangeError("group_size_check: need m >= 2^(k+1)");
  GroupSizeReport rep;
  rep.seeds = n_seeds;
  rep.alpha = concentration_radius(m, k, delta);
  if (rep.alpha >= 1.0) {
    rep.vacuous = true;
    rep.warnings.push_back("alpha >= 1: the lower group-size bound is vacuous");
  }
  const ParityTask task = ParityTask::canonical(k, k);
  for (int s = 0; s < n_seeds; ++s) {
    const Network net = init_binary(
        m, k, k, derive_seed(master_seed, StreamDomain::init, static_cast<std::uint64_t>(s)));
    if (group_sizes_within(classify_neurons(net, task, delta), m, k, rep.alpha))
      ++rep.passing_seeds;
  }
  rep.pass_fraction = static_cast<double>(rep.passing_seeds) / n_seeds;
  return rep;
}

}  // namespace sparity
