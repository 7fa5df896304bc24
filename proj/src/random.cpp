#include "ensemble_ols/random.hpp"

#include <cmath>
#include <numbers>

namespace ensemble_ols {

RandomStream::RandomStream(std::uint64_t seed) : engine_(seed) {}

RandomStream RandomStream::derive(std::uint64_t base_seed, StreamTag tag, std::uint64_t index) {
  const auto tag_value = static_cast<std::uint64_t>(tag);
  std::seed_seq seq{
      static_cast<std::uint32_t>(base_seed), static_cast<std::uint32_t>(base_seed >> 32),
      static_cast<std::uint32_t>(tag_value), static_cast<std::uint32_t>(tag_value >> 32),
      static_cast<std::uint32_t>(index),     static_cast<std::uint32_t>(index >> 32)};
  RandomStream stream(0);
  stream.engine_.seed(seq);
  return stream;
}

double RandomStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RandomStream::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  cached_normal_ = radius * std::sin(angle);
  has_cached_normal_ = true;
  return radius * std::cos(angle);
}

std::uint64_t RandomStream::below(std::uint64_t bound) {
  if (bound <= 1) return 0;
  // Largest multiple of bound that fits; draws at or above it are rejected.
  const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % bound + 1) % bound;
  std::uint64_t draw;
  do {
    draw = engine_();
  } while (draw > limit);
  return draw % bound;
}

void RandomStream::fill_normal(Eigen::MatrixXd& out) {
  double* data = out.data();
  for (Eigen::Index i = 0; i < out.size(); ++i) data[i] = normal();
}

void RandomStream::fill_normal(Eigen::VectorXd& out) {
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = normal();
}

}  // namespace ensemble_ols
