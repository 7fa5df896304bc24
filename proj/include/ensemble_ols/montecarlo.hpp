#pragma once

#include "ensemble_ols/datagen.hpp"
#include "ensemble_ols/risk_theory.hpp"
#include "ensemble_ols/sampling.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ensemble_ols {

/// Monte Carlo estimate with its standard error and, optionally, the
/// closed-form value it is checked against.
struct MCReport {
  double estimate = 0.0;
  double std_error = 0.0;  ///< sample standard deviation / sqrt(trials)
  std::int64_t trials = 0;
  std::optional<double> theory_value;
  std::optional<double> z_score;  ///< (estimate - theory) / std_error

  /// When std_error is exactly zero the z-score is 0 if the estimate equals
  /// the theory value to 1e-12 and +-infinity otherwise.
  static MCReport from_samples(std::span<const double> samples, std::optional<double> theory = std::nullopt);
  static MCReport from_moments(double mean, double sample_variance, std::int64_t trials,
                               std::optional<double> theory = std::nullopt);

  bool within(double z_limit) const noexcept { return !z_score || std::abs(*z_score) <= z_limit; }
};

/// JSON record with the field names above; a missing or infinite optional
/// value is written as null.
void to_json(nlohmann::json& out, const MCReport& report);

struct RiskBreakdown {
  double bias = 0.0;
  double variance = 0.0;
  double risk = 0.0;
};

/// Risk of beta_hat under Sigma = I, i.e. ||beta - beta_hat||^2.
double empirical_risk(const Eigen::VectorXd& beta, const Eigen::VectorXd& beta_hat);

/// Exact decomposition of the noise-averaged risk of beta' = f y:
/// bias = ||(I - f X) beta||^2, variance = sigma^2 ||f||_F^2.
RiskBreakdown bias_variance_decomposition(const Eigen::MatrixXd& f, const Eigen::MatrixXd& X,
                                          const Eigen::VectorXd& beta, double sigma);

struct PairTermReports {
  MCReport bias_same;
  MCReport bias_distinct;
  MCReport variance_same;
  MCReport variance_distinct;
};

/// Brute-force estimate of the four pairwise bias / variance expectations.
/// Each trial draws a fresh X and beta (spec.beta_mode), builds S_i, S_j by
/// splitting a random permutation of [p] into blocks of the prescribed
/// sizes, draws T_i, T_j independently with |T| = sizes.t_ii, and evaluates
/// the pairwise inner products directly. Trial t uses the stream derived
/// from (spec.seed, Oracle, t). Theory values assume E||beta||^2 = 1.
PairTermReports estimate_pair_terms(const ProblemSpec& spec, const PairSizes& sizes, std::int64_t trials,
                                    unsigned threads = 1);

struct IdentityCheckOptions {
  std::int64_t trials = 100'000;
  std::uint64_t seed = 42;
  unsigned threads = 1;
  /// |T_1| = |T_2| for the example-subsampling identities; 0 selects floor(n / 2).
  Eigen::Index example_subset_size = 0;
  bool subselect_smaller = true;  ///< the two column-subselection identities
  bool subselect_larger = true;   ///< the two row-subselection identities
  bool wishart = true;            ///< inverse and generalized inverse Wishart means
};

/// Entrywise Monte Carlo check of a matrix identity E[M] = target.
struct IdentityCheck {
  std::string name;
  bool skipped = false;
  std::string note;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  double max_abs_z = 0.0;
  MCReport worst;  ///< the entry attaining max_abs_z
  Eigen::MatrixXd mean;
  Eigen::MatrixXd target;
  Eigen::MatrixXd std_error;
};

/// Matrix identities behind the pairwise expectations, each with X drawn
/// fresh per trial (rows i.i.d. N(0, I)):
///   subselect_smaller_pinv:   E[S^T X^+ - (X S)^+] = 0            (X is n x p)
///   subselect_smaller_cross:  E[S^cT X^T F S^T X^+] = 0           (F fixed)
///   subselect_larger_gram:    E[(T1^T X)^+ T1^T ((T2^T X)^+ T2^T)^T - (X^T X)^{-1}] = 0
///   subselect_larger_cross:   E[((T1^T X)^+ T1^T)^T A (T2^T Y)^+ T2^T - (X^+)^T A Y^+] = 0
///   inverse_wishart_mean:     E[(S^T X^T X S)^{-1}] = I / (n - |S| - 1)
///   generalized_inverse_wishart_mean: E[(X S S^T X^T)^+] = |S| / (n (n - |S| - 1)) I
/// In the row-subselection identities X and Y are n x |S|. F and A are
/// standard normal matrices drawn once from the (seed, Fixture) stream.
std::vector<IdentityCheck> lemma_identity_checks(Eigen::Index n, Eigen::Index p, Eigen::Index subset_size,
                                                 const IdentityCheckOptions& options);

struct ConvergenceRow {
  std::int64_t k = 0;
  double mean_risk = 0.0;
  double se = 0.0;
  std::int64_t trials = 0;
};

struct ConvergenceResult {
  std::vector<ConvergenceRow> rows;
  /// trials x |k_grid| per-trial risks (for paired comparisons).
  Eigen::MatrixXd samples;
};

/// Empirical ensemble risk versus k. Per trial: a fresh instance from
/// (spec.seed, Instance, t) and max(k_grid) member draws from
/// (spec.seed, Subsets, t); the k-member ensemble is the first k members,
/// so every grid point sees an ensemble with the correct distribution.
ConvergenceResult risk_convergence_sim(const ProblemSpec& spec, const SubsampleScheme& scheme,
                                       std::span<const std::int64_t> k_grid, std::int64_t trials,
                                       unsigned threads = 1);

struct DescentResult {
  Eigen::VectorXd coef;
  std::int64_t iterations = 0;
  bool converged = false;
};

/// Gradient-descent minimizer of the expected dropout loss
/// E_S ||X S S^T b - y||^2 with feature j kept independently with
/// probability keep[j]. The expectation is formed from pairwise inclusion
/// probabilities (keep[j] on the diagonal, keep[j] keep[l] off it), so the
/// iteration never touches the closed-form dropout solution. Step size is
/// the reciprocal of a Gershgorin bound on the Hessian.
DescentResult dropout_descent_oracle(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                     const Eigen::VectorXd& keep, double gradient_tolerance = 1e-12,
                                     std::int64_t max_iterations = 2'000'000);

}  // namespace ensemble_ols
