#pragma once

#include <algorithm>
#include <cstdint>
#include <thread>
#include <vector>

namespace sparity::detail {

/// Splits [0, total) into contiguous shards and runs fn(shard, begin, end)
/// on up to `workers` threads (0 = hardware concurrency). Callers reduce
/// per-shard results in shard order.
template <typename Fn>
unsigned run_sharded(std::uint64_t total, unsigned workers, Fn&& fn) {
  if (workers == 0) workers = std::max(1U, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(
      std::min<std::uint64_t>(workers, std::max<std::uint64_t>(1, total / 4096)));
  if (workers == 1) {
    fn(0U, std::uint64_t{0}, total);
    return 1;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned s = 0; s < workers; ++s)
    pool.emplace_back([&, s] { fn(s, total * s / workers, total * (s + 1) / workers); });
  return workers;
}

/// Shard count run_sharded will use, so callers can size result arrays.
inline unsigned shard_count(std::uint64_t total, unsigned workers) {
  if (workers == 0) workers = std::max(1U, std::thread::hardware_concurrency());
  return static_cast<unsigned>(
      std::min<std::uint64_t>(workers, std::max<std::uint64_t>(1, total / 4096)));
}

}  // namespace sparity::detail
