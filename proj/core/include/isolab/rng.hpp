#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string_view>

namespace isolab {

/// Reproducible random stream.
///
/// Engine: std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Seeds pass through SplitMix64 first, and substreams are keyed by
/// mixing the parent seed with a stream id, so every (seed, stream) pair maps
/// to an independent, platform-independent sequence. Uniforms use the top 53
/// bits; normals use the Marsaglia polar method with the spare value cached.
class Rng {
 public:
  static constexpr std::string_view kDescription =
      "mt19937_64 seeded with splitmix64(seed); substream(id) has seed "
      "seed ^ splitmix64(id + 0x632BE59BD9B4E019); uniform = (u64 >> 11) * 2^-53; "
      "normal = marsaglia-polar";

  explicit Rng(std::uint64_t seed);

  static std::uint64_t splitmix64(std::uint64_t x) noexcept;

  /// Independent child stream. Does not advance this stream.
  Rng substream(std::uint64_t id) const;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t next_u64() { return engine_(); }
  double uniform();
  double normal();

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

}  // namespace isolab
