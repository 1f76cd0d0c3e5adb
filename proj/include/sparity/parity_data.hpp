#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sparity/error.hpp"
#include "sparity/rng.hpp"

namespace sparity {

/// Largest dimension for which the full hypercube is enumerated.
inline constexpr int kMaxEnumerationDim = 24;

/// A k-sparse parity problem over {-1,+1}^d. Coordinates are 0-based; the
/// support holds the k feature coordinates in the order given at
/// construction.
class ParityTask {
 public:
  ParityTask(int d, std::vector<int> support);

  /// Support {0, ..., k-1}.
  static ParityTask canonical(int d, int k);

  int dim() const noexcept { return d_; }
  int sparsity() const noexcept { return static_cast<int>(support_.size()); }
  const std::vector<int>& support() const noexcept { return support_; }
  bool is_feature(int j) const noexcept { return is_feature_[j]; }

  friend bool operator==(const ParityTask&, const ParityTask&) = default;

 private:
  int d_;
  std::vector<int> support_;
  std::vector<bool> is_feature_;
};

struct Sample {
  std::vector<double> x;
  double y = 1.0;
};

/// Row-major block of samples; row i is x_i, y[i] its label.
struct Batch {
  int d = 0;
  std::vector<double> x;
  std::vector<double> y;

  std::size_t size() const noexcept { return y.size(); }
  std::span<const double> input(std::size_t i) const {
    return {x.data() + i * static_cast<std::size_t>(d),
            static_cast<std::size_t>(d)};
  }
  Sample sample(std::size_t i) const;
};

/// Product of x over the support. Throws DimensionError on a length
/// mismatch and RangeError on an entry outside {-1,+1}.
double label(const ParityTask& task, std::span<const double> x);

/// B fresh uniform samples from the stream.
Batch sample_batch(const ParityTask& task, std::size_t batch_size,
                   SignStream& stream);

/// Row `index` of the hypercube in lexicographic order: bit (d-1-j) of
/// `index` set means x_j = -1, so index 0 is the all-ones vector.
void hypercube_point(std::uint64_t index, int d, std::span<double> out);

/// All 2^d samples in lexicographic order.
std::vector<Sample> enumerate_all(const ParityTask& task);

/// Same as enumerate_all but packed as a Batch.
Batch enumerate_batch(const ParityTask& task);

void require_enumerable(int d);

/// Visits every point of the hypercube in lexicographic order (or reversed)
/// without materializing the whole set. fn(index, x, y).
template <typename Fn>
void for_each_point(const ParityTask& task, Fn&& fn, bool reversed = false) {
  require_enumerable(task.dim());
  const int d = task.dim();
  const std::uint64_t count = std::uint64_t{1} << d;
  std::vector<double> x(static_cast<std::size_t>(d));
  for (std::uint64_t step = 0; step < count; ++step) {
    const std::uint64_t index = reversed ? count - 1 - step : step;
    hypercube_point(index, d, x);
    double y = 1.0;
    for (int j : task.support()) y *= x[static_cast<std::size_t>(j)];
    fn(index, std::span<const double>(x), y);
  }
}

}  // namespace sparity
