#include "sparity/parity_data.hpp"

#include <algorithm>
#include <string>

namespace sparity {

ParityTask::ParityTask(int d, std::vector<int> support)
    : d_(d), support_(std::move(support)) {
  if (d_ < 1) throw RangeError("parity task: d must be >= 1");
  if (support_.empty() || static_cast<int>(support_.size()) > d_)
    throw RangeError("parity task: need 1 <= k <= d");
  is_feature_.assign(static_cast<std::size_t>(d_), false);
  for (int j : support_) {
    if (j < 0 || j >= d_)
      throw RangeError("parity task: support index " + std::to_string(j) +
                       " outside [0, d)");
    if (is_feature_[static_cast<std::size_t>(j)])
      throw RangeError("parity task: duplicate support index " +
                       std::to_string(j));
    is_feature_[static_cast<std::size_t>(j)] = true;
  }
}

ParityTask ParityTask::canonical(int d, int k) {
  if (k < 1 || k > d) throw RangeError("parity task: need 1 <= k <= d");
  std::vector<int> support(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) support[static_cast<std::size_t>(j)] = j;
  return ParityTask(d, std::move(support));
}

Sample Batch::sample(std::size_t i) const {
  const auto row = input(i);
  return Sample{{row.begin(), row.end()}, y[i]};
}

double label(const ParityTask& task, std::span<const double> x) {
  if (static_cast<int>(x.size()) != task.dim())
    throw DimensionError("label: expected " + std::to_string(task.dim()) +
                         " entries, got " + std::to_string(x.size()));
  for (double v : x)
    if (v != 1.0 && v != -1.0)
      throw RangeError("label: entries must be -1 or +1");
  double y = 1.0;
  for (int j : task.support()) y *= x[static_cast<std::size_t>(j)];
  return y;
}

Batch sample_batch(const ParityTask& task, std::size_t batch_size,
                   SignStream& stream) {
  if (batch_size == 0) throw RangeError("sample_batch: batch size must be >= 1");
  const auto d = static_cast<std::size_t>(task.dim());
  Batch batch;
  batch.d = task.dim();
  batch.x.resize(batch_size * d);
  batch.y.resize(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    double* row = batch.x.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) row[j] = stream.next_sign();
    double y = 1.0;
    for (int j : task.support()) y *= row[j];
    batch.y[i] = y;
  }
  return batch;
}

void require_enumerable(int d) {
  if (d > kMaxEnumerationDim)
    throw RangeError("hypercube enumeration capped at d <= " +
                     std::to_string(kMaxEnumerationDim) + ", got " +
                     std::to_string(d));
}

void hypercube_point(std::uint64_t index, int d, std::span<double> out) {
  for (int j = 0; j < d; ++j)
    out[static_cast<std::size_t>(j)] = ((index >> (d - 1 - j)) & 1U) ? -1.0 : 1.0;
}

std::vector<Sample> enumerate_all(const ParityTask& task) {
  std::vector<Sample> out;
  out.reserve(std::size_t{1} << task.dim());
  for_each_point(task, [&](std::uint64_t, std::span<const double> x, double y) {
    out.push_back(Sample{{x.begin(), x.end()}, y});
  });
  return out;
}

Batch enumerate_batch(const ParityTask& task) {
  Batch batch;
  batch.d = task.dim();
  for_each_point(task, [&](std::uint64_t, std::span<const double> x, double y) {
    batch.x.insert(batch.x.end(), x.begin(), x.end());
    batch.y.push_back(y);
  });
  return batch;
}

}  // namespace sparity
