#pragma once

#include <cstdint>
#include <variant>

namespace ensemble_ols {

/// Tag for the k -> infinity (large-ensemble) query.
struct InfiniteEnsemble {
  friend bool operator==(InfiniteEnsemble, InfiniteEnsemble) = default;
};
using EnsembleSize = std::variant<std::int64_t, InfiniteEnsemble>;

/// Asymptotic regime: feature rate alpha, example rate eta, aspect ratio
/// gamma = p/n, noise sigma, ensemble size k and output scale mu.
struct TheoryQuery {
  double alpha = 0.5;
  double eta = 1.0;
  double gamma = 0.5;
  double sigma = 1.0;
  EnsembleSize k = InfiniteEnsemble{};
  double mu = 1.0;
};

/// Finite-sample cardinalities entering the pairwise expectations.
struct PairSizes {
  std::int64_t s_ii = 0;    // |S_i|
  std::int64_t t_ii = 0;    // |T_i|
  std::int64_t s_cap = 0;   // |S_i n S_j|
  std::int64_t sc_cap = 0;  // |S_i^c n S_j^c|
  std::int64_t n = 0;
  std::int64_t p = 0;

  /// InfeasibleSizes unless 0 <= s_cap <= s_ii <= p, 0 <= sc_cap <= p - s_ii,
  /// s_ii < t_ii - 1, t_ii <= n and s_cap < n - 1.
  void validate() const;
};

enum class RiskComponent { Bias, Variance };

/// Expected pairwise bias / variance term at finite n, p for equal-size
/// members. same_member selects the i = j case.
double finite_pair_term(RiskComponent kind, bool same_member, const PairSizes& sizes, double sigma,
                        double beta_norm_sq);

/// Almost-sure limit of the pairwise term as n, p -> infinity with ||beta|| = 1.
/// Requires eta > alpha gamma and alpha^2 gamma < 1.
double limiting_pair_term(RiskComponent kind, bool same_member, const TheoryQuery& q);

/// Limiting bias and variance of a k-member ensemble.
double limiting_bias(const TheoryQuery& q);
double limiting_variance(const TheoryQuery& q);

/// Limiting risk of a k-member ensemble; an InfiniteEnsemble k dispatches to
/// large_ensemble_risk. mu is ignored (see mu_scaled_risk).
double ensemble_risk(const TheoryQuery& q);

/// ((1 - alpha)^2 + sigma^2 alpha^2 gamma) / (1 - alpha^2 gamma).
double large_ensemble_risk(double alpha, double gamma, double sigma);

/// Minimizer of the large-ensemble risk over [0, min(1, 1/gamma)]: the
/// smaller root of alpha^2 gamma - alpha (gamma (sigma^2 + 1) + 1) + 1.
double optimal_alpha(double gamma, double sigma);

/// Limiting risk of optimally tuned ridge regression.
double optimal_ridge_risk(double gamma, double sigma);

/// Large-ensemble risk of the mu-scaled ensemble (uses q.alpha, q.gamma,
/// q.sigma, q.mu).
double mu_scaled_risk(const TheoryQuery& q);

struct OptimalScale {
  double mu_star = 1.0;
  double risk = 0.0;
};

OptimalScale optimal_mu(double alpha, double gamma, double sigma);

/// Limiting pairwise variance for minimum-norm (interpolating) members,
/// |T| < |S|: sigma^2 eta^2 / (gamma - eta^2) for i != j and
/// sigma^2 eta / (alpha gamma - eta) for i = j.
double interpolator_variance_term(bool same_member, double alpha, double eta, double gamma, double sigma);

/// Margin kept from the open feasible interval's endpoints.
inline constexpr double kFeasibleMargin = 1e-6;

/// argmin over alpha of the finite-k limiting risk on
/// (0, min(1, eta/gamma, 1/sqrt(gamma))), by golden-section search.
double finite_k_optimal_alpha(double gamma, double sigma, double eta, std::int64_t k);

}  // namespace ensemble_ols
