#include "ensemble_ols/estimators.hpp"

#include "ensemble_ols/error.hpp"
#include "ensemble_ols/parallel.hpp"

#include <cmath>

namespace ensemble_ols {

Eigen::MatrixXd gather(const Eigen::MatrixXd& X, const IndexList& rows, const IndexList& cols) {
  return X(rows, cols);
}

Eigen::VectorXd gather(const Eigen::VectorXd& v, const IndexList& rows) { return v(rows); }

namespace {

Eigen::MatrixXd svd_pseudo_inverse(const Eigen::MatrixXd& A) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(kRankCutoff);
  return svd.solve(Eigen::MatrixXd::Identity(A.rows(), A.rows()));
}

void check_indices(const SubsetPair& pair, Eigen::Index p, Eigen::Index n) {
  for (Index j : pair.features) {
    if (j < 0 || j >= p) throw Error(ErrorCode::InvalidDimensions, "feature index out of range");
  }
  for (Index m : pair.examples) {
    if (m < 0 || m >= n) throw Error(ErrorCode::InvalidDimensions, "example index out of range");
  }
}

void check_xy(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() != y.size()) throw Error(ErrorCode::DimensionMismatch, "X rows and y length differ");
}

}  // namespace

PseudoInverse pseudo_inverse(const Eigen::MatrixXd& A) {
  PseudoInverse out;
  if (A.size() == 0) {
    out.matrix = Eigen::MatrixXd::Zero(A.cols(), A.rows());
    return out;
  }
  if (A.rows() >= A.cols()) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    qr.setThreshold(kRankCutoff);
    if (qr.rank() == A.cols()) {
      out.matrix = qr.solve(Eigen::MatrixXd::Identity(A.rows(), A.rows()));
      return out;
    }
  } else {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
    cod.setThreshold(kRankCutoff);
    if (cod.rank() == A.rows()) {
      out.matrix = cod.pseudoInverse();
      return out;
    }
  }
  out.matrix = svd_pseudo_inverse(A);
  out.rank_deficient = true;
  return out;
}

MemberFit fit_subsampled_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const SubsetPair& pair) {
  check_xy(X, y);
  check_indices(pair, X.cols(), X.rows());
  const auto s = static_cast<Index>(pair.features.size());
  const auto t = static_cast<Index>(pair.examples.size());
  if (s >= t - 1) {
    throw Error(ErrorCode::ConstraintInfeasible, "ordinary least squares member needs |S| < |T| - 1");
  }

  MemberFit fit{pair, Eigen::VectorXd::Zero(X.cols()), false};
  if (s == 0) return fit;

  const Eigen::MatrixXd A = gather(X, pair.examples, pair.features);
  const Eigen::VectorXd b = gather(y, pair.examples);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  qr.setThreshold(kRankCutoff);
  Eigen::VectorXd local;
  if (qr.rank() == s) {
    local = qr.solve(b);
  } else {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(kRankCutoff);
    local = svd.solve(b);
    fit.rank_deficient = true;
  }
  fit.coef(pair.features) = local;
  return fit;
}

MemberFit fit_min_norm_member(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const SubsetPair& pair) {
  check_xy(X, y);
  check_indices(pair, X.cols(), X.rows());
  const auto s = static_cast<Index>(pair.features.size());
  const auto t = static_cast<Index>(pair.examples.size());
  if (t >= s) {
    throw Error(ErrorCode::ConstraintInfeasible, "minimum-norm member needs |T| < |S|");
  }

  MemberFit fit{pair, Eigen::VectorXd::Zero(X.cols()), false};
  if (t == 0) return fit;

  const Eigen::MatrixXd A = gather(X, pair.examples, pair.features);
  const Eigen::VectorXd b = gather(y, pair.examples);
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
  cod.setThreshold(kRankCutoff);
  Eigen::VectorXd local;
  if (cod.rank() == t) {
    local = cod.solve(b);
  } else {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(kRankCutoff);
    local = svd.solve(b);
    fit.rank_deficient = true;
  }
  fit.coef(pair.features) = local;
  return fit;
}

EnsembleFit fit_ensemble(const ProblemInstance& inst, const SubsampleScheme& scheme, int k, RandomStream& rng,
                         unsigned threads) {
  if (k < 1) throw Error(ErrorCode::InvalidDimensions, "ensemble size k must be at least 1");
  std::vector<SubsetPair> pairs;
  pairs.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) pairs.push_back(draw_subsets(scheme, inst.p(), inst.n(), rng));

  EnsembleFit fit;
  fit.members.resize(pairs.size());
  parallel_for(pairs.size(), threads, [&](std::size_t i) {
    fit.members[i] = fit_subsampled_ols(inst.X, inst.y, pairs[i]);
  });
  return fit;
}

Eigen::VectorXd ensemble_coefficients(const EnsembleFit& fit) {
  if (fit.members.empty()) return {};
  Eigen::VectorXd total = Eigen::VectorXd::Zero(fit.members.front().coef.size());
  for (const auto& member : fit.members) total += member.coef;
  return (fit.mu / static_cast<double>(fit.members.size())) * total;
}

namespace {

Eigen::VectorXd solve_spd(const Eigen::MatrixXd& M, const Eigen::VectorXd& rhs) {
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::SingularSystem, "system matrix is not positive definite");
  }
  Eigen::VectorXd solution = llt.solve(rhs);
  if (!solution.allFinite()) throw Error(ErrorCode::SingularSystem, "non-finite solution");
  return solution;
}

}  // namespace

Eigen::VectorXd fit_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda) {
  check_xy(X, y);
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorCode::DomainError, "ridge lambda must be finite and non-negative");
  }
  if (lambda == 0.0 && X.rows() <= X.cols()) {
    throw Error(ErrorCode::SingularSystem, "unregularized ridge needs n > p");
  }
  Eigen::MatrixXd gram = X.transpose() * X;
  gram.diagonal().array() += lambda;
  return solve_spd(gram, X.transpose() * y);
}

Eigen::VectorXd fit_dropout(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(ErrorCode::DomainError, "dropout alpha must lie in (0, 1]");
  return fit_generalized_dropout(X, y, Eigen::VectorXd::Constant(X.cols(), alpha), false);
}

Eigen::VectorXd fit_generalized_dropout(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                        const Eigen::VectorXd& alpha, bool corrected) {
  check_xy(X, y);
  if (alpha.size() != X.cols()) throw Error(ErrorCode::DimensionMismatch, "alpha length must equal p");
  if (!((alpha.array() > 0.0).all() && (alpha.array() <= 1.0).all())) {
    throw Error(ErrorCode::DomainError, "every keep probability must lie in (0, 1]");
  }
  if ((alpha.array() == 1.0).all() && X.rows() <= X.cols()) {
    throw Error(ErrorCode::SingularSystem, "no dropout and n <= p leaves X^T X singular");
  }
  Eigen::MatrixXd system = X.transpose() * X;
  const Eigen::ArrayXd inflation = (1.0 - alpha.array()) / alpha.array();
  system.diagonal().array() *= 1.0 + inflation;
  Eigen::VectorXd solution = solve_spd(system, X.transpose() * y);
  if (!corrected) solution.array() /= alpha.array();
  return solution;
}

Eigen::MatrixXd assemble_linear_map(const EnsembleFit& fit, const Eigen::MatrixXd& X, LinearMapBudget budget) {
  const auto entries = static_cast<std::size_t>(X.rows()) * static_cast<std::size_t>(X.cols());
  if (entries > budget.max_entries) {
    throw Error(ErrorCode::BudgetExceeded, "n * p exceeds the linear-map memory budget");
  }
  Eigen::MatrixXd map = Eigen::MatrixXd::Zero(X.cols(), X.rows());
  if (fit.members.empty()) return map;
  for (const auto& member : fit.members) {
    check_indices(member.pair, X.cols(), X.rows());
    const auto inverse = pseudo_inverse(gather(X, member.pair.examples, member.pair.features));
    map(member.pair.features, member.pair.examples) += inverse.matrix;
  }
  map *= fit.mu / static_cast<double>(fit.members.size());
  return map;
}

}  // namespace ensemble_ols
