#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace sgl {

// All randomness in the library flows from 64-bit seeds. Sub-streams are
// derived by mixing a parent seed with integer tags, so that a single
// top-level seed determines every mask, batch and initialization.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags);

// Named sub-stream tags.
namespace stream {
inline constexpr std::uint64_t kInit = 0x1001;
inline constexpr std::uint64_t kBatches = 0x1002;
inline constexpr std::uint64_t kViews = 0x1003;
inline constexpr std::uint64_t kPretrainBatches = 0x1004;
inline constexpr std::uint64_t kSplit = 0x1005;
inline constexpr std::uint64_t kNoise = 0x1006;
inline constexpr std::uint64_t kViewBranch1 = 1;
inline constexpr std::uint64_t kViewBranch2 = 2;
}  // namespace stream

// Thin wrapper over mt19937_64 with distribution code written out by hand so
// that streams are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1) with 53 bits of precision.
  double uniform();
  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace sgl
