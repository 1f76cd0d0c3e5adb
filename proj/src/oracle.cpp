#include "sparity/oracle.hpp"

#include <cmath>

#include "sparity/exact_sum.hpp"

namespace sparity {

namespace {

void check_shapes(const Network& net, const ParityTask& task) {
  if (net.dim() != task.dim())
    throw DimensionError("oracle: network and task dimensions differ");
  require_enumerable(task.dim());
}

GradientEstimate gradient_by_enumeration(const Network& net, const ParityTask& task,
                                         bool reversed) {
  const int m = net.width();
  const int d = net.dim();
  std::vector<ExactSum> sums(static_cast<std::size_t>(m) * d);
  for_each_point(
      task,
      [&](std::uint64_t, std::span<const double> x, double y) {
        for (int r = 0; r < m; ++r) {
          const double z = preactivation(net, r, x);
          const double coef = net.activation_derivative(z) * net.output_weight(r) * y;
          ExactSum* row = sums.data() + static_cast<std::size_t>(r) * d;
          for (int j = 0; j < d; ++j) row[j].add(coef * x[static_cast<std::size_t>(j)]);
        }
      },
      reversed);
  GradientEstimate g{m, d, std::vector<double>(sums.size()), {}};
  for (std::size_t i = 0; i < sums.size(); ++i)
    g.first[i] = std::ldexp(sums[i].value(), -d);
  return g;
}

}  // namespace

GradientEstimate exact_gradient(const Network& net, const ParityTask& task,
                                bool reversed) {
  check_shapes(net, task);
  return gradient_by_enumeration(net, task, reversed);
}

ExactStatistics exact_statistics(const Network& net, const ParityTask& task,
                                 bool reversed) {
  check_shapes(net, task);
  const int d = task.dim();
  const std::uint64_t total = std::uint64_t{1} << d;
  ExactStatistics stats;
  ExactSum margin_sum;
  std::uint64_t correct = 0;
  for_each_output(
      net, task, 0, total,
      [&](std::uint64_t, double y, double f) {
        const double mg = y * f;
        margin_sum.add(mg);
        ++stats.margin_histogram[mg];
        if (mg > 0.0) ++correct;
      },
      reversed);
  stats.mean_margin = std::ldexp(margin_sum.value(), -d);
  stats.exact_loss = 1.0 - stats.mean_margin;
  stats.exact_accuracy = static_cast<double>(correct) / static_cast<double>(total);
  stats.exact_gradient = gradient_by_enumeration(net, task, reversed);
  return stats;
}

double histogram_mean(const std::map<double, std::uint64_t>& histogram) {
  ExactSum sum;
  std::uint64_t total = 0;
  for (const auto& [value, count] : histogram) {
    const double c = static_cast<double>(count);
    const double p = value * c;
    sum.add(p);
    sum.add(std::fma(value, c, -p));
    total += count;
  }
  if (total == 0) return 0.0;
  // Totals are powers of two for full enumerations; division is then exact.
  return sum.value() / static_cast<double>(total);
}

double margin_quantile(const std::map<double, std::uint64_t>& histogram, double q) {
  if (!(q >= 0.0 && q <= 1.0)) throw RangeError("margin quantile: q must lie in [0, 1]");
  std::uint64_t total = 0;
  for (const auto& entry : histogram) total += entry.second;
  if (total == 0) throw RangeError("margin quantile: empty histogram");
  // Rank of the lower q-quantile (1-based): ceil(q * total), at least 1.
  auto rank = static_cast<std::uint64_t>(std::ceil(q * static_cast<double>(total)));
  if (rank == 0) rank = 1;
  std::uint64_t seen = 0;
  for (const auto& [value, count] : histogram) {
    seen += count;
    if (seen >= rank) return value;
  }
  return histogram.rbegin()->first;
}

double exact_margin_quantile(const Network& net, const ParityTask& task, double q) {
  if (!(q >= 0.0 && q <= 1.0)) throw RangeError("margin quantile: q must lie in [0, 1]");
  check_shapes(net, task);
  std::map<double, std::uint64_t> histogram;
  for_each_output(net, task, 0, std::uint64_t{1} << task.dim(),
                  [&](std::uint64_t, double y, double f) { ++histogram[y * f]; });
  return margin_quantile(histogram, q);
}

}  // namespace sparity
