#pragma once

#include "ensemble_ols/random.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>

namespace ensemble_ols {

enum class BetaMode {
  UnitSphere,     ///< normalized standard Gaussian, ||beta|| = 1
  GaussianPrior,  ///< beta ~ N(0, I/p)
};

struct ProblemSpec {
  Eigen::Index n = 200;
  Eigen::Index p = 100;
  double sigma = 1.0;
  BetaMode beta_mode = BetaMode::UnitSphere;
  std::uint64_t seed = 42;

  void validate() const;  // InvalidDimensions
  double gamma() const noexcept { return static_cast<double>(p) / static_cast<double>(n); }
};

/// One draw of y = X beta + sigma z with standard normal X (Sigma = I).
struct ProblemInstance {
  Eigen::MatrixXd X;      // n x p
  Eigen::VectorXd beta;   // p
  Eigen::VectorXd noise;  // n, the z draw
  Eigen::VectorXd y;      // n
  double sigma = 0.0;

  Eigen::Index n() const noexcept { return X.rows(); }
  Eigen::Index p() const noexcept { return X.cols(); }
};

/// Draw order from the stream: X in column-major order, then beta, then z.
ProblemInstance generate_problem(const ProblemSpec& spec, RandomStream& rng);

/// Convenience: the instance for trial `trial` of a seeded family.
ProblemInstance generate_problem(const ProblemSpec& spec, std::uint64_t trial);

Eigen::VectorXd draw_beta(BetaMode mode, Eigen::Index p, RandomStream& rng);

/// Debug dump. `x_path`: n rows of p comma-separated values (no header).
/// `target_path`: header "index,y,beta" and max(n, p) rows, cells left empty
/// past the end of the shorter vector.
void write_instance_csv(const ProblemInstance& inst, const std::filesystem::path& x_path,
                        const std::filesystem::path& target_path);

}  // namespace ensemble_ols
