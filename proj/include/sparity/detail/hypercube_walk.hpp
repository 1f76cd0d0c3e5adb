#pragma once

#include <bit>
#include <cstdint>
#include <vector>

namespace sparity {

template <typename Fn>
void for_each_output(const Network& net, const ParityTask& task,
                     std::uint64_t begin, std::uint64_t end, Fn&& fn,
                     bool reversed) {
  if (begin >= end) return;
  const int d = net.dim();
  const int m = net.width();
  const auto stride = static_cast<std::size_t>(d) + 1;
  // prefix[r * (d+1) + j] = sum_{i<j} w_ri x_i, accumulated left to right.
  std::vector<double> prefix(static_cast<std::size_t>(m) * stride, 0.0);
  std::vector<double> x(static_cast<std::size_t>(d));
  const auto& w = net.weights();
  const auto& a = net.second_layer();

  std::uint64_t prev = 0;
  bool first = true;
  const std::uint64_t count = end - begin;
  for (std::uint64_t step = 0; step < count; ++step) {
    const std::uint64_t index = reversed ? end - 1 - step : begin + step;
    int from = 0;
    if (!first) {
      const std::uint64_t changed = index ^ prev;
      from = d - std::bit_width(changed);
    }
    for (int j = from; j < d; ++j)
      x[static_cast<std::size_t>(j)] = ((index >> (d - 1 - j)) & 1U) ? -1.0 : 1.0;
    for (int r = 0; r < m; ++r) {
      double* p = prefix.data() + static_cast<std::size_t>(r) * stride;
      const double* wr = w.data() + static_cast<std::size_t>(r) * d;
      for (int j = from; j < d; ++j) p[j + 1] = p[j] + wr[j] * x[static_cast<std::size_t>(j)];
    }
    double y = 1.0;
    for (int j : task.support()) y *= x[static_cast<std::size_t>(j)];
    double f = 0.0;
    for (int r = 0; r < m; ++r) {
      const double z = prefix[static_cast<std::size_t>(r) * stride + d];
      f += a[static_cast<std::size_t>(r)] * net.activation(z);
    }
    fn(index, y, f);
    prev = index;
    first = false;
  }
}

}  // namespace sparity
