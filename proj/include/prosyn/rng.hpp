#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace prosyn {

/// Philox4x32-10 counter-based block cipher (Salmon et al., SC'11).
///
/// Stateless: every 128-bit counter maps to four independent 32-bit words
/// under a 64-bit key. This is what makes parallel trajectory generation
/// reproducible regardless of scheduling: each draw is addressed by
/// (trajectory, step, dimension, purpose) rather than by call order.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static Counter block(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = std::uint64_t(kMul0) * ctr[0];
      const std::uint64_t p1 = std::uint64_t(kMul1) * ctr[2];
      const auto hi0 = std::uint32_t(p0 >> 32), lo0 = std::uint32_t(p0);
      const auto hi1 = std::uint32_t(p1 >> 32), lo1 = std::uint32_t(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }
};

/// Keyed stream of standard-normal and uniform draws on top of Philox.
///
/// Draw addressing: counter = (trajectory, step, dimension, purpose),
/// key = seed. purpose 0 is reserved for dynamics noise, purpose 1 for
/// initial-state sampling, purpose >= 2 for ad-hoc consumers.
class NoiseStream {
 public:
  explicit NoiseStream(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  /// Standard-normal draw for the addressed slot (Box-Muller, cosine branch).
  double normal(std::uint32_t traj, std::uint32_t step, std::uint32_t dim,
                std::uint32_t purpose = 0) const {
    const auto w = words(traj, step, dim, purpose);
    const double u1 = to_unit(w[0]);
    const double u2 = to_unit(w[1]);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  /// Uniform draw in (0,1).
  double uniform(std::uint32_t traj, std::uint32_t step, std::uint32_t dim,
                 std::uint32_t purpose = 1) const {
    return to_unit(words(traj, step, dim, purpose)[0]);
  }

  Philox4x32::Counter words(std::uint32_t traj, std::uint32_t step,
                            std::uint32_t dim, std::uint32_t purpose) const {
    const Philox4x32::Counter ctr{traj, step, dim, purpose};
    const Philox4x32::Key key{std::uint32_t(seed_), std::uint32_t(seed_ >> 32)};
    return Philox4x32::block(ctr, key);
  }

 private:
  static constexpr double kPi = 3.14159265358979323846;

  // (w + 1/2) / 2^32 keeps the value strictly inside (0,1).
  static double to_unit(std::uint32_t w) {
    return (double(w) + 0.5) * (1.0 / 4294967296.0);
  }

  std::uint64_t seed_;
};

}  // namespace prosyn
