#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace ensemble_ols {

/// Purpose tags mixed into derived seeds so that independent consumers
/// (instance generation, subset draws, oracle fixtures, ...) never share a
/// stream even when they use the same trial index.
enum class StreamTag : std::uint64_t {
  Instance = 1,
  Subsets = 2,
  Oracle = 3,
  Fixture = 4,
  Experiment = 5,
};

/// Deterministic random stream.
///
/// Engine: std::mt19937_64 (fully specified by the standard, so sequences are
/// identical across platforms). The distributions are implemented here
/// rather than taken from <random>, whose algorithms are
/// implementation-defined:
///   - uniform():  top 53 bits of one engine output, scaled to [0, 1).
///   - normal():   Box-Muller on two uniforms u1 in (0, 1], u2 in [0, 1);
///                 the cosine branch is returned first, the sine branch is
///                 cached and returned by the next call.
///   - below(m):   rejection sampling on the engine output (no modulo bias).
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed);

  /// Counter-based derivation: the stream for (base_seed, tag, index) is
  /// seeded through std::seed_seq with the six 32-bit halves of the three
  /// inputs. Parallel trials use index = trial number.
  static RandomStream derive(std::uint64_t base_seed, StreamTag tag, std::uint64_t index);

  std::uint64_t next_u64() { return engine_(); }
  double uniform();
  double normal();
  std::uint64_t below(std::uint64_t bound);
  bool bernoulli(double probability) { return uniform() < probability; }

  /// Fills column-major storage in storage order.
  void fill_normal(Eigen::MatrixXd& out);
  void fill_normal(Eigen::VectorXd& out);

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace ensemble_ols
