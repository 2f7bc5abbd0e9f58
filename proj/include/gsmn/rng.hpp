#pragma once

#include <array>
#include <cstdint>

namespace gsmn {

// Counter-based generator (Philox4x32-10). The 64-bit seed is the key; the
// counter is (draw index, stream id), so distinct streams never share a block.
// All variates are derived from raw bits with portable algorithms, so a given
// (seed, stream) yields the same sequence on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : seed_(seed), stream_(stream) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  std::uint64_t next_u64() noexcept;
  // Uniform on the open interval (0, 1) with 53 bits of resolution.
  double uniform() noexcept;
  double normal() noexcept;
  // Marsaglia-Tsang; shape < 1 handled by the U^(1/shape) boost.
  double gamma(double shape) noexcept;
  double beta(double alpha, double beta) noexcept;
  bool bernoulli(double p) noexcept;
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept;

  // Child generator on a fresh stream; the parent's own sequence is unaffected
  // apart from the split counter.
  Rng split() noexcept;

 private:
  std::array<std::uint32_t, 4> block(std::uint64_t index) const noexcept;

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::uint64_t splits_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int buffered_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace gsmn
