#include "ensemble_ols/datagen.hpp"
#include "ensemble_ols/error.hpp"
#include "ensemble_ols/estimators.hpp"
#include "ensemble_ols/risk_theory.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace ensemble_ols;

namespace {

IndexList iota(Index count) {
  IndexList out(static_cast<std::size_t>(count));
  std::iota(out.begin(), out.end(), Index{0});
  return out;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::ConfigError;
}

double rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).norm() / b.norm(); }

}  // namespace

TEST_CASE("full subsets reproduce the OLS solution") {
  const auto inst = generate_problem({.n = 40, .p = 10}, 0);
  const auto fit = fit_subsampled_ols(inst, {iota(10), iota(40)});
  CHECK((fit.coef - oracle::svd_pinv(inst.X) * inst.y).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_FALSE(fit.rank_deficient);
}

TEST_CASE("noiseless member reproduces its fitted rows") {
  ProblemSpec spec{.n = 30, .p = 12, .sigma = 0.0};
  auto inst = generate_problem(spec, 1);
  const IndexList S = {0, 2, 3, 5, 8, 11};
  const IndexList T = {1, 3, 4, 6, 9, 10, 12, 15, 17, 20, 22};
  inst.beta.setZero();
  for (auto j : S) inst.beta[j] = 1.0 / std::sqrt(6.0);
  inst.y = inst.X * inst.beta;
  const auto fit = fit_subsampled_ols(inst, {S, T});
  const Eigen::VectorXd pred = gather(inst.X, T, S) * gather(fit.coef, S);
  CHECK((pred - gather(inst.y, T)).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((fit.coef - inst.beta).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("member support, normal equations and scaling equivariance") {
  const auto inst = generate_problem({.n = 60, .p = 25}, 2);
  RandomStream rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const auto pair = draw_subsets({.alpha = 0.4, .eta = 0.5}, 25, 60, rng);
    const auto fit = fit_subsampled_ols(inst, pair);
    Eigen::VectorXd off = fit.coef;
    for (auto j : pair.features) off[j] = 0.0;
    CHECK(off.cwiseAbs().maxCoeff() == 0.0);

    const Eigen::MatrixXd A = gather(inst.X, pair.examples, pair.features);
    const Eigen::VectorXd b = gather(inst.y, pair.examples);
    const Eigen::VectorXd c = gather(fit.coef, pair.features);
    CHECK((A.transpose() * (A * c - b)).norm() <= 1e-8 * b.norm());

    const auto scaled = fit_subsampled_ols(inst.X, -3.5 * inst.y, pair);
    CHECK((scaled.coef + 3.5 * fit.coef).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, fit.coef.norm()));
  }
}

TEST_CASE("member with |S| >= |T| - 1 is rejected") {
  const auto inst = generate_problem({.n = 20, .p = 10}, 0);
  CHECK(code_of([&] { fit_subsampled_ols(inst, {iota(9), iota(10)}); }) == ErrorCode::ConstraintInfeasible);
}

TEST_CASE("rank-deficient member falls back to the pseudoinverse and is flagged") {
  auto inst = generate_problem({.n = 20, .p = 6}, 0);
  inst.X.col(3) = inst.X.col(1);
  const auto fit = fit_subsampled_ols(inst, {iota(6), iota(20)});
  CHECK(fit.rank_deficient);
  CHECK((fit.coef - oracle::svd_pinv(inst.X) * inst.y).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("member noise energy matches 5/14 at n=40, p=10, |S|=5, |T|=20") {
  // y = z only: E||coef||^2 is the same-member variance term.
  std::vector<double> energy;
  for (std::uint64_t t = 0; t < 10000; ++t) {
    auto rng = RandomStream::derive(2024, StreamTag::Oracle, t);
    Eigen::MatrixXd X(40, 10);
    rng.fill_normal(X);
    Eigen::VectorXd z(40);
    rng.fill_normal(z);
    const auto pair = draw_fixed_size_pair(5, 20, 10, 40, rng);
    energy.push_back(fit_subsampled_ols(X, z, pair).coef.squaredNorm());
  }
  const auto m = oracle::moments(energy);
  CHECK(std::abs(oracle::z(m, 5.0 / 14.0)) <= 4.0);
}

TEST_CASE("fit_ensemble basics") {
  const auto inst = generate_problem({.n = 50, .p = 20}, 0);
  RandomStream a(5), b(5);
  const auto one = fit_ensemble(inst, {.alpha = 0.5, .eta = 0.8}, 1, a);
  const auto pair = draw_subsets({.alpha = 0.5, .eta = 0.8}, 20, 50, b);
  CHECK(one.members.size() == 1);
  CHECK(one.mu == 1.0);
  CHECK(ensemble_coefficients(one) == fit_subsampled_ols(inst, pair).coef);

  RandomStream c(6);
  const auto full = fit_ensemble(inst, {.alpha = 1.0, .eta = 1.0}, 7, c);
  const Eigen::VectorXd ols = oracle::svd_pinv(inst.X) * inst.y;
  for (const auto& m : full.members) CHECK((m.coef - ols).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((ensemble_coefficients(full) - ols).cwiseAbs().maxCoeff() < 1e-12);

  RandomStream d(7);
  CHECK_THROWS_AS(fit_ensemble(inst, {.alpha = 0.5}, 0, d), Error);
}

TEST_CASE("fit_ensemble does not depend on the thread count") {
  const auto inst = generate_problem({.n = 80, .p = 40}, 1);
  RandomStream a(9), b(9);
  const auto serial = fit_ensemble(inst, {.alpha = 0.3, .eta = 0.9}, 16, a, 1);
  const auto threaded = fit_ensemble(inst, {.alpha = 0.3, .eta = 0.9}, 16, b, 4);
  CHECK(ensemble_coefficients(serial) == ensemble_coefficients(threaded));
}

TEST_CASE("k=100 ensemble at alpha_star approaches the ridge optimum (n=200, gamma=0.5)") {
  const double target = oracle::ridge_optimum(0.5, 1.0);
  CHECK(target == doctest::Approx(0.414214).epsilon(1e-6));
  const double alpha = oracle::alpha_star(0.5, 1.0);
  std::vector<double> risks;
  for (std::uint64_t t = 0; t < 20; ++t) {
    const auto inst = generate_problem({.n = 200, .p = 100, .seed = 11}, t);
    auto rng = RandomStream::derive(11, StreamTag::Subsets, t);
    const auto fit = fit_ensemble(inst, {.alpha = alpha, .eta = 1.0}, 100, rng);
    risks.push_back((ensemble_coefficients(fit) - inst.beta).squaredNorm());
  }
  CHECK(std::abs(oracle::moments(risks).mean / target - 1.0) < 0.10);
}

TEST_CASE("ensemble_coefficients scaling") {
  EnsembleFit fit;
  fit.members.push_back({{}, Eigen::Vector3d(1, 0, 0), false});
  fit.members.push_back({{}, Eigen::Vector3d(0, 1, 0), false});
  CHECK(ensemble_coefficients(fit).isApprox(Eigen::Vector3d(0.5, 0.5, 0)));
  fit.mu = 0.0;
  CHECK(ensemble_coefficients(fit).isZero(0.0));
  fit.members.pop_back();
  fit.mu = 2.0;
  CHECK(ensemble_coefficients(fit).isApprox(Eigen::Vector3d(2, 0, 0)));
}

TEST_CASE("ridge limits") {
  const auto inst = generate_problem({.n = 40, .p = 10}, 0);
  const Eigen::VectorXd xty = inst.X.transpose() * inst.y;
  for (double lambda : {1e3, 1e6, 1e9}) CHECK(fit_ridge(inst, lambda).norm() <= xty.norm() / lambda);
  CHECK((fit_ridge(inst, 0.0) - oracle::svd_pinv(inst.X) * inst.y).cwiseAbs().maxCoeff() < 1e-12);

  const auto wide = generate_problem({.n = 10, .p = 20}, 0);
  CHECK(code_of([&] { fit_ridge(wide, 0.0); }) == ErrorCode::SingularSystem);
  CHECK_NOTHROW(fit_ridge(wide, 0.5));
  CHECK_THROWS_AS(fit_ridge(inst, -1.0), Error);
}

TEST_CASE("ridge argmin is invariant to joint scaling of y and beta") {
  const auto inst = generate_problem({.n = 100, .p = 60}, 4);
  const std::vector<double> grid = {5, 10, 20, 40, 60, 80, 120, 200, 400};
  auto argmin = [&](double c) {
    std::size_t best = 0;
    double best_risk = INFINITY;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double r = (fit_ridge(inst.X, c * inst.y, grid[i]) - c * inst.beta).squaredNorm();
      if (r < best_risk) best_risk = r, best = i;
    }
    return best;
  };
  CHECK(argmin(1.0) == argmin(7.0));
  CHECK(argmin(1.0) == argmin(0.01));
}

TEST_CASE("ridge sweep reaches the optimal ridge risk at n=200, gamma=0.5") {
  const std::vector<double> grid = {40, 60, 80, 90, 100, 110, 120, 140, 170, 220};
  std::vector<std::vector<double>> risks(grid.size());
  for (std::uint64_t t = 0; t < 100; ++t) {
    const auto inst = generate_problem({.n = 200, .p = 100, .seed = 77}, t);
    for (std::size_t i = 0; i < grid.size(); ++i) risks[i].push_back((fit_ridge(inst, grid[i]) - inst.beta).squaredNorm());
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (oracle::moments(risks[i]).mean < oracle::moments(risks[best]).mean) best = i;
  const auto m = oracle::moments(risks[best]);
  CHECK(std::abs(oracle::z(m, 0.414214)) <= 4.0);
}

TEST_CASE("dropout with alpha = 1 is OLS; generalized dropout reduces correctly") {
  const auto inst = generate_problem({.n = 50, .p = 20}, 0);
  const Eigen::VectorXd ols = oracle::svd_pinv(inst.X) * inst.y;
  CHECK((fit_dropout(inst, 1.0) - ols).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((fit_generalized_dropout(inst, Eigen::VectorXd::Ones(20), false) - ols).cwiseAbs().maxCoeff() < 1e-12);
  for (double a : {0.2, 0.55, 0.9}) {
    const auto gen = fit_generalized_dropout(inst, Eigen::VectorXd::Constant(20, a), false);
    CHECK((gen - fit_dropout(inst, a)).cwiseAbs().maxCoeff() < 1e-10);
    const auto corrected = fit_generalized_dropout(inst, Eigen::VectorXd::Constant(20, a), true);
    CHECK((corrected - a * gen).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS(fit_dropout(inst, 0.0), Error);
  Eigen::VectorXd bad = Eigen::VectorXd::Constant(20, 0.5);
  bad[3] = 0.0;
  CHECK_THROWS_AS(fit_generalized_dropout(inst, bad, false), Error);
}

TEST_CASE("dropout closed form minimizes the expected dropout loss (descent oracle)") {
  // Expected loss over independent keep masks m_j ~ Bernoulli(a_j):
  // E||y - X diag(m) b||^2 = b^T (P o G) b - 2 (a o X^T y)^T b + ||y||^2 with
  // P_jl = a_j a_l (j != l), a_j (j = l). Plain gradient descent.
  const auto inst = generate_problem({.n = 50, .p = 20}, 5);
  RandomStream rng(6);
  Eigen::VectorXd keep(20);
  for (Eigen::Index j = 0; j < 20; ++j) keep[j] = 0.25 + 0.7 * rng.uniform();
  for (const Eigen::VectorXd& a : {Eigen::VectorXd(Eigen::VectorXd::Constant(20, 0.6)), keep}) {
    const Eigen::MatrixXd G = inst.X.transpose() * inst.X;
    Eigen::MatrixXd P = a * a.transpose();
    P.diagonal() = a;
    const Eigen::MatrixXd H = P.cwiseProduct(G);
    const Eigen::VectorXd g0 = a.cwiseProduct(inst.X.transpose() * inst.y);
    const double L = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(H).eigenvalues().maxCoeff();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(20);
    for (int it = 0; it < 200000; ++it) {
      const Eigen::VectorXd grad = H * b - g0;
      if (grad.norm() < 1e-13 * g0.norm()) break;
      b -= grad / L;
    }
    CHECK((b - fit_generalized_dropout(inst, a, false)).cwiseAbs().maxCoeff() < 1e-6);
  }
  CHECK((fit_dropout(inst, 0.6) - fit_generalized_dropout(inst, Eigen::VectorXd::Constant(20, 0.6), false))
            .cwiseAbs()
            .maxCoeff() < 1e-10);
}

TEST_CASE("dropout and ridge agree up to rescaling at n=2000, p=1000") {
  const auto inst = generate_problem({.n = 2000, .p = 1000}, 0);
  const double n = 2000.0;

  // Risk-optimal ridge for ||beta|| = 1, sigma = 1 is lambda = p; alpha = n / (n + lambda).
  const double lambda = 1000.0;
  const double alpha = n / (n + lambda);
  const Eigen::VectorXd ridge = fit_ridge(inst, lambda);
  CHECK(rel_err(alpha * fit_dropout(inst, alpha), ridge) < 0.05);

  // Corrected generalized dropout with (1 - a_j) / a_j = lambda / (n Sigma_jj), Sigma = I.
  const Eigen::VectorXd a = Eigen::VectorXd::Constant(1000, 1.0 / (1.0 + lambda / n));
  CHECK(rel_err(fit_generalized_dropout(inst, a, true), ridge) < 0.05);

  // Argmin agreement: dropout-optimal alpha and its ridge counterpart give risks within 2%.
  double best_alpha = 0.0, best_risk = INFINITY;
  for (double al : {0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85}) {
    const double r = (al * fit_dropout(inst, al) - inst.beta).squaredNorm();
    if (r < best_risk) best_risk = r, best_alpha = al;
  }
  const double ridge_risk = (fit_ridge(inst, n * (1 - best_alpha) / best_alpha) - inst.beta).squaredNorm();
  CHECK(std::abs(ridge_risk / best_risk - 1.0) < 0.02);
}

TEST_CASE("min-norm member interpolates when T = [n]") {
  const auto inst = generate_problem({.n = 30, .p = 60}, 0);
  const IndexList S = iota(45);
  const auto fit = fit_min_norm_member(inst, {S, iota(30)});
  CHECK((gather(inst.X, iota(30), S) * gather(fit.coef, S) - inst.y).cwiseAbs().maxCoeff() < 1e-8);
  Eigen::VectorXd off = fit.coef;
  for (auto j : S) off[j] = 0.0;
  CHECK(off.isZero(0.0));
}

TEST_CASE("min-norm member has the smallest norm among solutions") {
  const auto inst = generate_problem({.n = 40, .p = 50}, 1);
  RandomStream rng(2);
  const auto pair = draw_fixed_size_pair(35, 20, 50, 40, rng);
  const auto fit = fit_min_norm_member(inst, pair);
  const Eigen::MatrixXd A = gather(inst.X, pair.examples, pair.features);
  const Eigen::VectorXd c = gather(fit.coef, pair.features);
  CHECK((A * c - gather(inst.y, pair.examples)).norm() < 1e-8);
  CHECK((c - oracle::svd_pinv(A) * gather(inst.y, pair.examples)).cwiseAbs().maxCoeff() < 1e-10);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  const Eigen::MatrixXd null = lu.kernel();
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::VectorXd w(null.cols());
    rng.fill_normal(w);
    const Eigen::VectorXd other = c + null * w;
    CHECK((A * other - A * c).norm() < 1e-8);
    CHECK(other.norm() >= c.norm());
  }
  CHECK(code_of([&] { fit_min_norm_member(inst, {iota(10), iota(20)}); }) == ErrorCode::ConstraintInfeasible);
}

TEST_CASE("min-norm member variance at n=100, p=100, alpha=1, eta=0.5") {
  // Exact finite-sample value: sigma^2 E tr((A A^T)^{-1}) for A ~ 50 x 100
  // Gaussian, i.e. the inverse-Wishart trace 50 / (100 - 50 - 1) = 50/49.
  std::vector<double> var;
  for (std::uint64_t t = 0; t < 2000; ++t) {
    auto rng = RandomStream::derive(31, StreamTag::Oracle, t);
    Eigen::MatrixXd X(100, 100);
    rng.fill_normal(X);
    const auto pair = draw_fixed_size_pair(100, 50, 100, 100, rng);
    var.push_back(oracle::svd_pinv(gather(X, pair.examples, pair.features)).squaredNorm());
  }
  const auto m = oracle::moments(var);
  CHECK(std::abs(oracle::z(m, 50.0 / 49.0)) <= 4.0);
}

TEST_CASE("assemble_linear_map") {
  const auto inst = generate_problem({.n = 40, .p = 10, .sigma = 0.8}, 0);
  EnsembleFit single;
  single.members.push_back(fit_subsampled_ols(inst, {iota(10), iota(40)}));
  CHECK((assemble_linear_map(single, inst.X) - oracle::svd_pinv(inst.X)).cwiseAbs().maxCoeff() < 1e-12);

  RandomStream rng(3);
  auto fit = fit_ensemble(inst, {.alpha = 0.5, .eta = 0.6}, 9, rng);
  fit.mu = 1.3;
  const Eigen::MatrixXd f = assemble_linear_map(fit, inst.X);
  CHECK(f.rows() == 10);
  CHECK(f.cols() == 40);
  CHECK((f * inst.y - ensemble_coefficients(fit)).cwiseAbs().maxCoeff() < 1e-10);

  // Variance over fresh noise: E||f sigma z||^2 = sigma^2 ||f||_F^2.
  std::vector<double> draws;
  RandomStream noise(4);
  Eigen::VectorXd z(40);
  for (int t = 0; t < 10000; ++t) {
    noise.fill_normal(z);
    draws.push_back((0.8 * f * z).squaredNorm());
  }
  CHECK(std::abs(oracle::z(oracle::moments(draws), 0.64 * f.squaredNorm())) <= 4.0);

  CHECK(code_of([&] { assemble_linear_map(fit, inst.X, {.max_entries = 399}); }) == ErrorCode::BudgetExceeded);
  CHECK_NOTHROW(assemble_linear_map(fit, inst.X, {.max_entries = 400}));
}
