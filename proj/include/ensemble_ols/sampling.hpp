#pragma once

#include "ensemble_ols/random.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace ensemble_ols {

using Index = Eigen::Index;
using IndexList = std::vector<Index>;

enum class SubsetStrategy { FixedSize, CoinFlip };

/// Feature rate alpha and example rate eta for member subset draws.
struct SubsampleScheme {
  double alpha = 1.0;
  double eta = 1.0;
  SubsetStrategy strategy = SubsetStrategy::FixedSize;
  int max_rejects = 1000;

  /// Throws ConstraintInfeasible on out-of-range rates or a non-positive
  /// rejection budget.
  void validate() const;
};

/// Feature subset S over [p] and example subset T over [n], both sorted and
/// duplicate free. A selection matrix is represented by its index list.
struct SubsetPair {
  IndexList features;
  IndexList examples;
};

/// |S| = floor(alpha p) under FixedSize. Computed with a small tolerance so
/// that e.g. alpha = 0.3, p = 10 gives 3 rather than 2.
Index fixed_subset_size(double rate, Index population) noexcept;

/// Uniformly random ordering of [0, population); Fisher-Yates.
IndexList random_permutation(Index population, RandomStream& rng);

/// Uniform sample of `count` distinct indices from [0, population), sorted.
/// Partial Fisher-Yates.
IndexList sample_without_replacement(Index population, Index count, RandomStream& rng);

/// Each index of [0, population) kept independently with the given
/// probability, sorted.
IndexList sample_bernoulli(Index population, double probability, RandomStream& rng);

/// Draws one (S, T) pair satisfying |S| < |T| - 1.
///
/// FixedSize: |S| = floor(alpha p), |T| = floor(eta n); ConstraintInfeasible
/// if that violates the constraint. CoinFlip: independent coins with
/// probability alpha / eta, redrawn until the constraint holds or
/// max_rejects redraws are spent (RejectionBudgetExhausted).
SubsetPair draw_subsets(const SubsampleScheme& scheme, Index p, Index n, RandomStream& rng);

/// Fixed-size pair without the |S| < |T| - 1 constraint; used for
/// interpolating (|T| < |S|) members and by the oracles.
SubsetPair draw_fixed_size_pair(Index s, Index t, Index p, Index n, RandomStream& rng);

struct InclusionStats {
  Eigen::VectorXd feature_frequency;  // length p
  Eigen::VectorXd example_frequency;  // length n
  Index draws = 0;
};

/// Empirical inclusion frequency of every feature and example index.
InclusionStats inclusion_stats(std::span<const SubsetPair> draws, Index p, Index n);

}  // namespace ensemble_ols
