#include "ensemble_ols/sampling.hpp"

#include "ensemble_ols/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace ensemble_ols {

void SubsampleScheme::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw Error(ErrorCode::ConstraintInfeasible, "alpha must lie in [0, 1]");
  }
  if (!(eta > 0.0 && eta <= 1.0)) {
    throw Error(ErrorCode::ConstraintInfeasible, "eta must lie in (0, 1]");
  }
  if (strategy == SubsetStrategy::CoinFlip && max_rejects < 1) {
    throw Error(ErrorCode::ConstraintInfeasible, "max_rejects must be positive");
  }
}

Index fixed_subset_size(double rate, Index population) noexcept {
  const double scaled = rate * static_cast<double>(population);
  return static_cast<Index>(std::floor(scaled + 1e-9 * std::max(1.0, scaled)));
}

namespace {

// Partial Fisher-Yates: the first `count` slots end up a uniform ordered sample.
IndexList shuffle_prefix(Index population, Index count, RandomStream& rng) {
  IndexList pool(static_cast<std::size_t>(population));
  std::iota(pool.begin(), pool.end(), Index{0});
  for (Index i = 0; i < count; ++i) {
    const auto j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(population - i)));
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
  }
  pool.resize(static_cast<std::size_t>(count));
  return pool;
}

}  // namespace

IndexList random_permutation(Index population, RandomStream& rng) {
  if (population < 0) throw Error(ErrorCode::InvalidDimensions, "negative population");
  return shuffle_prefix(population, population, rng);
}

IndexList sample_without_replacement(Index population, Index count, RandomStream& rng) {
  if (count < 0 || count > population) {
    throw Error(ErrorCode::InvalidDimensions, "sample size outside [0, population]");
  }
  IndexList sample = shuffle_prefix(population, count, rng);
  std::sort(sample.begin(), sample.end());
  return sample;
}

IndexList sample_bernoulli(Index population, double probability, RandomStream& rng) {
  IndexList kept;
  for (Index i = 0; i < population; ++i) {
    if (rng.bernoulli(probability)) kept.push_back(i);
  }
  return kept;
}

SubsetPair draw_subsets(const SubsampleScheme& scheme, Index p, Index n, RandomStream& rng) {
  scheme.validate();
  if (p < 1 || n < 3) {
    throw Error(ErrorCode::InvalidDimensions, "draw_subsets needs p >= 1 and n >= 3");
  }

  if (scheme.strategy == SubsetStrategy::FixedSize) {
    const Index s = fixed_subset_size(scheme.alpha, p);
    const Index t = fixed_subset_size(scheme.eta, n);
    if (s >= t - 1) {
      std::ostringstream msg;
      msg << "|S| = " << s << " must be below |T| - 1 = " << t - 1;
      throw Error(ErrorCode::ConstraintInfeasible, msg.str());
    }
    return draw_fixed_size_pair(s, t, p, n, rng);
  }

  for (int attempt = 0; attempt <= scheme.max_rejects; ++attempt) {
    SubsetPair pair{sample_bernoulli(p, scheme.alpha, rng), sample_bernoulli(n, scheme.eta, rng)};
    if (static_cast<Index>(pair.features.size()) < static_cast<Index>(pair.examples.size()) - 1) {
      return pair;
    }
  }
  throw Error(ErrorCode::RejectionBudgetExhausted,
              "no coin-flip draw satisfied |S| < |T| - 1 within max_rejects redraws");
}

SubsetPair draw_fixed_size_pair(Index s, Index t, Index p, Index n, RandomStream& rng) {
  SubsetPair pair;
  pair.features = sample_without_replacement(p, s, rng);
  pair.examples = sample_without_replacement(n, t, rng);
  return pair;
}

InclusionStats inclusion_stats(std::span<const SubsetPair> draws, Index p, Index n) {
  if (draws.empty()) throw Error(ErrorCode::EmptyInput, "inclusion_stats needs at least one draw");
  InclusionStats stats;
  stats.feature_frequency = Eigen::VectorXd::Zero(p);
  stats.example_frequency = Eigen::VectorXd::Zero(n);
  for (const auto& pair : draws) {
    for (Index j : pair.features) {
      if (j < 0 || j >= p) throw Error(ErrorCode::InvalidDimensions, "feature index out of range");
      stats.feature_frequency[j] += 1.0;
    }
    for (Index m : pair.examples) {
      if (m < 0 || m >= n) throw Error(ErrorCode::InvalidDimensions, "example index out of range");
      stats.example_frequency[m] += 1.0;
    }
  }
  stats.draws = static_cast<Index>(draws.size());
  stats.feature_frequency /= static_cast<double>(stats.draws);
  stats.example_frequency /= static_cast<double>(stats.draws);
  return stats;
}

}  // namespace ensemble_ols
