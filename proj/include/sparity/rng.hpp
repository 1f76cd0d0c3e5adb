#pragma once

#include <cstdint>
#include <random>

namespace sparity {

// Random streams are std::mt19937_64 engines (output fully specified by the
// C++ standard, hence identical on every platform). A single master seed is
// expanded into independent sub-streams with SplitMix64:
//
//   derive_seed(master, domain, index)
//     = splitmix64(splitmix64(master ^ domain_tag(domain)) + index)
//
// Bits are taken from raw engine words, never through std::*_distribution,
// whose algorithms are implementation-defined.
inline constexpr const char* kRngScheme = "mt19937_64+splitmix64/v1";

enum class StreamDomain : std::uint64_t {
  run = 1,         // per-seed sub-seed of a multi-run experiment
  init = 2,        // network initialization
  batch = 3,       // online batch for step t
  evaluation = 4,  // Monte-Carlo test set
  probe = 5,       // analysis-only draws (gradient gap batches etc.)
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t derive_seed(std::uint64_t master, StreamDomain domain,
                          std::uint64_t index) noexcept;

/// Seeded stream of fair ±1 signs, consumed 64 bits per engine word.
class SignStream {
 public:
  explicit SignStream(std::uint64_t seed) : engine_(seed) {}

  /// +1 for a zero bit, -1 for a one bit; least significant bit first.
  int next_sign() {
    if (bits_left_ == 0) {
      word_ = engine_();
      bits_left_ = 64;
    }
    const int bit = static_cast<int>(word_ & 1U);
    word_ >>= 1;
    --bits_left_;
    return bit ? -1 : 1;
  }

  std::uint64_t next_word() { return engine_(); }

  /// Uniform on [0, 1) from the top 53 bits of one engine word.
  double next_uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
  std::uint64_t word_ = 0;
  int bits_left_ = 0;
};

}  // namespace sparity
