#pragma once

#include <cstdint>
#include <map>

#include "sparity/network.hpp"
#include "sparity/optimizer.hpp"
#include "sparity/parity_data.hpp"

namespace sparity {

/// Exact population quantities obtained by visiting all 2^d inputs.
struct ExactStatistics {
  double exact_loss = 0.0;          // 1 - E[y f]
  double mean_margin = 0.0;         // E[y f]
  GradientEstimate exact_gradient;  // E[sigma'(<w_r,x>) a_r y x_j]
  double exact_accuracy = 0.0;
  std::map<double, std::uint64_t> margin_histogram;
};

/// Exhaustive averages over the hypercube (d <= 24). All sums are exact and
/// correctly rounded, so reversing the enumeration gives identical results.
ExactStatistics exact_statistics(const Network& net, const ParityTask& task,
                                 bool reversed = false);

/// The exact enumeration average of the batch statistic (first layer only).
GradientEstimate exact_gradient(const Network& net, const ParityTask& task,
                                bool reversed = false);

/// Smallest margin value v with P(y f <= v) >= q over the uniform hypercube.
double exact_margin_quantile(const Network& net, const ParityTask& task, double q);

/// Same quantile read off an existing histogram.
double margin_quantile(const std::map<double, std::uint64_t>& histogram, double q);

/// E[y f] recomputed from the histogram alone.
double histogram_mean(const std::map<double, std::uint64_t>& histogram);

}  // namespace sparity
