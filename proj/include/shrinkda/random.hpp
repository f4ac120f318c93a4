#pragma once

#include <cstdint>

#include <Eigen/Dense>
#include <boost/math/special_functions/erf.hpp>

namespace shrinkda {

namespace detail {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Counter-based random stream keyed by (seed, stream_id).
///
/// Draw n of a stream is a pure function of (seed, stream_id, n), so two
/// streams built from the same pair replay the same sequence bit-for-bit and
/// distinct streams can be consumed on distinct threads.  Normals come from
/// the inverse normal CDF of the uniforms, which keeps the sequence identical
/// across standard libraries.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed),
        stream_id_(stream_id),
        key_(detail::mix64(seed ^ detail::mix64(stream_id + detail::kGolden))) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint64_t position() const { return counter_; }

  /// Independent child stream; children of distinct indices never overlap.
  RngStream split(std::uint64_t child) const {
    return RngStream(seed_, detail::mix64(stream_id_ * detail::kGolden + child + 1));
  }

  std::uint64_t next_u64() {
    ++counter_;
    return detail::mix64(key_ + counter_ * detail::kGolden);
  }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() {
    // Phi^{-1}(u) = -sqrt(2) erfc^{-1}(2u)
    return -1.4142135623730950488 * boost::math::erfc_inv(2.0 * uniform());
  }

  Eigen::VectorXd normal_vector(Eigen::Index n) {
    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < n; ++i) out[i] = normal();
    return out;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace shrinkda
