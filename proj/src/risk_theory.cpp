#include "ensemble_ols/risk_theory.hpp"

#include "ensemble_ols/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ensemble_ols {

namespace {

void require(bool condition, const char* message) {
  if (!condition) throw Error(ErrorCode::DomainError, message);
}

void check_finite_inputs(double alpha, double gamma, double sigma) {
  require(std::isfinite(alpha) && std::isfinite(gamma) && std::isfinite(sigma), "inputs must be finite");
  require(alpha >= 0.0 && alpha <= 1.0, "alpha must lie in [0, 1]");
  require(gamma > 0.0, "gamma must be positive");
  require(sigma >= 0.0, "sigma must be non-negative");
}

void check_large_ensemble_domain(double alpha, double gamma, double sigma) {
  check_finite_inputs(alpha, gamma, sigma);
  require(alpha * alpha * gamma < 1.0, "requires alpha^2 gamma < 1");
}

void check_finite_k_domain(const TheoryQuery& q) {
  check_large_ensemble_domain(q.alpha, q.gamma, q.sigma);
  require(q.eta > 0.0 && q.eta <= 1.0, "eta must lie in (0, 1]");
  require(q.eta > q.alpha * q.gamma, "requires eta > alpha gamma");
}

std::int64_t finite_k(const TheoryQuery& q) {
  const auto* k = std::get_if<std::int64_t>(&q.k);
  require(k != nullptr, "query needs a finite ensemble size");
  require(*k >= 1, "ensemble size k must be at least 1");
  return *k;
}

}  // namespace

void PairSizes::validate() const {
  const bool ok = p >= 1 && n >= 1 && 0 <= s_cap && s_cap <= s_ii && s_ii <= p && 0 <= sc_cap &&
                  sc_cap <= p - s_ii && s_ii < t_ii - 1 && t_ii <= n && s_cap < n - 1;
  if (!ok) {
    std::ostringstream msg;
    msg << "infeasible pair sizes (s_ii=" << s_ii << ", t_ii=" << t_ii << ", s_cap=" << s_cap
        << ", sc_cap=" << sc_cap << ", n=" << n << ", p=" << p << ")";
    throw Error(ErrorCode::InfeasibleSizes, msg.str());
  }
}

double finite_pair_term(RiskComponent kind, bool same_member, const PairSizes& sizes, double sigma,
                        double beta_norm_sq) {
  sizes.validate();
  require(sigma >= 0.0 && beta_norm_sq >= 0.0, "sigma and ||beta||^2 must be non-negative");
  const double p = static_cast<double>(sizes.p);
  const double n = static_cast<double>(sizes.n);
  const double s = static_cast<double>(sizes.s_ii);
  const double t = static_cast<double>(sizes.t_ii);
  const double cap = static_cast<double>(sizes.s_cap);

  // i = j uses (|S_i|, |T_i|); i != j uses (|S_i n S_j|, n).
  const double used = same_member ? s : cap;
  const double rows = same_member ? t : n;
  const double denominator = rows - used - 1.0;
  require(denominator > 0.0, "pairwise term denominator must be positive");
  const double inflation = used / denominator;

  if (kind == RiskComponent::Variance) return sigma * sigma * inflation;
  const double untouched = same_member ? p - s : static_cast<double>(sizes.sc_cap);
  return untouched / p * (1.0 + inflation) * beta_norm_sq;
}

double limiting_pair_term(RiskComponent kind, bool same_member, const TheoryQuery& q) {
  check_finite_k_domain(q);
  const double a = q.alpha;
  const double g = q.gamma;
  const double s2 = q.sigma * q.sigma;
  if (same_member) {
    const double inflation = a * g / (q.eta - a * g);
    return kind == RiskComponent::Bias ? (1.0 - a) * (1.0 + inflation) : s2 * inflation;
  }
  const double inflation = a * a * g / (1.0 - a * a * g);
  return kind == RiskComponent::Bias ? (1.0 - a) * (1.0 - a) * (1.0 + inflation) : s2 * inflation;
}

namespace {

double mix(const TheoryQuery& q, RiskComponent kind) {
  const double k = static_cast<double>(finite_k(q));
  return (k - 1.0) / k * limiting_pair_term(kind, false, q) + 1.0 / k * limiting_pair_term(kind, true, q);
}

}  // namespace

double limiting_bias(const TheoryQuery& q) { return mix(q, RiskComponent::Bias); }

double limiting_variance(const TheoryQuery& q) { return mix(q, RiskComponent::Variance); }

double ensemble_risk(const TheoryQuery& q) {
  if (std::holds_alternative<InfiniteEnsemble>(q.k)) return large_ensemble_risk(q.alpha, q.gamma, q.sigma);
  check_finite_k_domain(q);
  const double k = static_cast<double>(finite_k(q));
  const double a = q.alpha;
  const double g = q.gamma;
  const double s2 = q.sigma * q.sigma;
  const double shared = ((1.0 - a) * (1.0 - a) + s2 * a * a * g) / (1.0 - a * a * g);
  const double own = (q.eta * (1.0 - a) + s2 * a * g) / (q.eta - a * g);
  return (k - 1.0) / k * shared + 1.0 / k * own;
}

double large_ensemble_risk(double alpha, double gamma, double sigma) {
  check_large_ensemble_domain(alpha, gamma, sigma);
  const double s2 = sigma * sigma;
  return ((1.0 - alpha) * (1.0 - alpha) + s2 * alpha * alpha * gamma) / (1.0 - alpha * alpha * gamma);
}

double optimal_alpha(double gamma, double sigma) {
  require(std::isfinite(gamma) && gamma > 0.0, "gamma must be positive");
  require(std::isfinite(sigma) && sigma >= 0.0, "sigma must be non-negative");
  const double b = gamma * (sigma * sigma + 1.0) + 1.0;
  // The discriminant in the sum-of-squares form never goes negative through
  // rounding; the smaller root is written as 2 / (b + sqrt(.)) to avoid
  // cancellation when 4 gamma << b^2.
  const double shifted = gamma * (sigma * sigma - 1.0) + 1.0;
  const double root = std::sqrt(shifted * shifted + 4.0 * sigma * sigma * gamma * gamma);
  return 2.0 / (b + root);
}

double optimal_ridge_risk(double gamma, double sigma) {
  require(std::isfinite(gamma) && gamma > 0.0, "gamma must be positive");
  require(std::isfinite(sigma) && sigma >= 0.0, "sigma must be non-negative");
  const double s2 = sigma * sigma;
  const double ratio = (gamma - 1.0) / gamma;
  return 0.5 * (ratio - s2 + std::sqrt((s2 - ratio) * (s2 - ratio) + 4.0 * s2));
}

double mu_scaled_risk(const TheoryQuery& q) {
  require(std::isfinite(q.mu), "mu must be finite");
  const double r = large_ensemble_risk(q.alpha, q.gamma, q.sigma);
  return q.mu * q.mu * r + (1.0 - q.mu) * (1.0 - q.mu) + 2.0 * q.mu * (1.0 - q.mu) * (1.0 - q.alpha);
}

OptimalScale optimal_mu(double alpha, double gamma, double sigma) {
  const double r = large_ensemble_risk(alpha, gamma, sigma);
  const double denominator = r + 2.0 * alpha - 1.0;
  if (!(std::abs(denominator) > 1e-300)) {
    throw Error(ErrorCode::DegenerateDenominator, "R_alpha + 2 alpha - 1 vanishes");
  }
  return {alpha / denominator, 1.0 - alpha * alpha / denominator};
}

double interpolator_variance_term(bool same_member, double alpha, double eta, double gamma, double sigma) {
  check_finite_inputs(alpha, gamma, sigma);
  require(eta > 0.0 && eta <= 1.0, "eta must lie in (0, 1]");
  const double s2 = sigma * sigma;
  if (same_member) {
    require(alpha * gamma > eta, "i = j interpolator term requires alpha gamma > eta");
    return s2 * eta / (alpha * gamma - eta);
  }
  require(gamma > eta * eta, "i != j interpolator term requires gamma > eta^2");
  return s2 * eta * eta / (gamma - eta * eta);
}

double finite_k_optimal_alpha(double gamma, double sigma, double eta, std::int64_t k) {
  if (!(gamma > 0.0 && sigma >= 0.0 && eta > 0.0 && eta <= 1.0 && k >= 1)) {
    throw Error(ErrorCode::InfeasibleInterval, "invalid gamma, sigma, eta or k");
  }
  const double upper_limit = std::min({1.0, eta / gamma, 1.0 / std::sqrt(gamma)});
  double lo = kFeasibleMargin;
  double hi = upper_limit - kFeasibleMargin;
  if (!(hi > lo)) throw Error(ErrorCode::InfeasibleInterval, "feasible alpha interval is empty");

  auto risk = [&](double alpha) {
    return ensemble_risk(TheoryQuery{alpha, eta, gamma, sigma, std::int64_t{k}, 1.0});
  };

  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double left = hi - ratio * (hi - lo);
  double right = lo + ratio * (hi - lo);
  double f_left = risk(left);
  double f_right = risk(right);
  for (int iter = 0; iter < 200 && hi - lo > 1e-13; ++iter) {
    if (f_left <= f_right) {
      hi = right;
      right = left;
      f_right = f_left;
      left = hi - ratio * (hi - lo);
      f_left = risk(left);
    } else {
      lo = left;
      left = right;
      f_left = f_right;
      right = lo + ratio * (hi - lo);
      f_right = risk(right);
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace ensemble_ols
