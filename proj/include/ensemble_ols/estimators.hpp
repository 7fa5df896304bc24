#pragma once

#include "ensemble_ols/datagen.hpp"
#include "ensemble_ols/sampling.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace ensemble_ols {

/// Relative singular-value (and QR pivot) cutoff used for rank decisions.
inline constexpr double kRankCutoff = 1e-10;

/// Rows x cols gather of a matrix; the implicit product T^T X S.
Eigen::MatrixXd gather(const Eigen::MatrixXd& X, const IndexList& rows, const IndexList& cols);
Eigen::VectorXd gather(const Eigen::VectorXd& v, const IndexList& rows);

struct PseudoInverse {
  Eigen::MatrixXd matrix;  // cols(A) x rows(A)
  bool rank_deficient = false;
};

/// Moore-Penrose pseudoinverse of a dense matrix. Tall full-rank input goes
/// through column-pivoted QR; wide input through a complete orthogonal
/// decomposition; rank deficiency falls back to a thresholded SVD.
PseudoInverse pseudo_inverse(const Eigen::MatrixXd& A);

/// One ensemble member. coef has length p and is zero off pair.features.
struct MemberFit {
  SubsetPair pair;
  Eigen::VectorXd coef;
  bool rank_deficient = false;  ///< the SVD fallback was taken
};

struct EnsembleFit {
  std::vector<MemberFit> members;
  double mu = 1.0;
};

/// Ordinary least squares on the |T| x |S| submatrix (requires |S| < |T| - 1,
/// otherwise ConstraintInfeasible). Numerical rank deficiency is not thrown:
/// the member is solved with the SVD pseudoinverse and flagged.
MemberFit fit_subsampled_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const SubsetPair& pair);
inline MemberFit fit_subsampled_ols(const ProblemInstance& inst, const SubsetPair& pair) {
  return fit_subsampled_ols(inst.X, inst.y, pair);
}

/// Minimum-norm solution of the underdetermined subproblem (|T| < |S|).
MemberFit fit_min_norm_member(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const SubsetPair& pair);
inline MemberFit fit_min_norm_member(const ProblemInstance& inst, const SubsetPair& pair) {
  return fit_min_norm_member(inst.X, inst.y, pair);
}

/// Draws k subset pairs from rng first, then fits the members (in parallel
/// when threads != 1). The result does not depend on the thread count.
EnsembleFit fit_ensemble(const ProblemInstance& inst, const SubsampleScheme& scheme, int k,
                         RandomStream& rng, unsigned threads = 1);

/// (mu / k) * sum of member coefficients.
Eigen::VectorXd ensemble_coefficients(const EnsembleFit& fit);

/// (X^T X + lambda I)^{-1} X^T y. SingularSystem when lambda = 0 and the
/// Gram matrix is singular (in particular whenever n <= p).
Eigen::VectorXd fit_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda);
inline Eigen::VectorXd fit_ridge(const ProblemInstance& inst, double lambda) {
  return fit_ridge(inst.X, inst.y, lambda);
}

/// Minimizer of the expected dropout loss with keep probability alpha:
/// (1/alpha) (X^T X + ((1 - alpha)/alpha) diag(X^T X))^{-1} X^T y.
Eigen::VectorXd fit_dropout(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double alpha);
inline Eigen::VectorXd fit_dropout(const ProblemInstance& inst, double alpha) {
  return fit_dropout(inst.X, inst.y, alpha);
}

/// Per-feature keep probabilities A = diag(alpha):
/// A^{-1} (X^T X + (I - A) A^{-1} diag(X^T X))^{-1} X^T y, or A times that
/// when `corrected` is set.
Eigen::VectorXd fit_generalized_dropout(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                        const Eigen::VectorXd& alpha, bool corrected);
inline Eigen::VectorXd fit_generalized_dropout(const ProblemInstance& inst, const Eigen::VectorXd& alpha,
                                               bool corrected) {
  return fit_generalized_dropout(inst.X, inst.y, alpha, corrected);
}

struct LinearMapBudget {
  std::size_t max_entries = 4'000'000;
};

/// The p x n matrix f(X) = (mu/k) sum_i S_i (T_i^T X S_i)^+ T_i^T, so that
/// f(X) y equals ensemble_coefficients(fit).
Eigen::MatrixXd assemble_linear_map(const EnsembleFit& fit, const Eigen::MatrixXd& X,
                                    LinearMapBudget budget = {});

}  // namespace ensemble_ols
