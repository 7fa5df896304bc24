#include "ensemble_ols/datagen.hpp"

#include "ensemble_ols/error.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace ensemble_ols {

void ProblemSpec::validate() const {
  if (n < 3) throw Error(ErrorCode::InvalidDimensions, "n must be at least 3");
  if (p < 1) throw Error(ErrorCode::InvalidDimensions, "p must be at least 1");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw Error(ErrorCode::InvalidDimensions, "sigma must be finite and non-negative");
  }
}

Eigen::VectorXd draw_beta(BetaMode mode, Eigen::Index p, RandomStream& rng) {
  Eigen::VectorXd beta(p);
  rng.fill_normal(beta);
  if (mode == BetaMode::UnitSphere) {
    const double norm = beta.norm();
    // A zero Gaussian vector has probability zero; fall back to e_1 anyway.
    if (norm == 0.0) {
      beta.setZero();
      beta[0] = 1.0;
    } else {
      beta /= norm;
    }
  } else {
    beta /= std::sqrt(static_cast<double>(p));
  }
  return beta;
}

ProblemInstance generate_problem(const ProblemSpec& spec, RandomStream& rng) {
  spec.validate();
  ProblemInstance inst;
  inst.X.resize(spec.n, spec.p);
  rng.fill_normal(inst.X);
  inst.beta = draw_beta(spec.beta_mode, spec.p, rng);
  inst.noise.resize(spec.n);
  rng.fill_normal(inst.noise);
  inst.sigma = spec.sigma;
  inst.y = inst.X * inst.beta + spec.sigma * inst.noise;
  return inst;
}

ProblemInstance generate_problem(const ProblemSpec& spec, std::uint64_t trial) {
  auto rng = RandomStream::derive(spec.seed, StreamTag::Instance, trial);
  return generate_problem(spec, rng);
}

namespace {

void write_number(std::ostream& out, double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  out << buf;
}

}  // namespace

void write_instance_csv(const ProblemInstance& inst, const std::filesystem::path& x_path,
                        const std::filesystem::path& target_path) {
  std::ofstream xs(x_path);
  if (!xs) throw Error(ErrorCode::ConfigError, "cannot open " + x_path.string());
  for (Eigen::Index i = 0; i < inst.n(); ++i) {
    for (Eigen::Index j = 0; j < inst.p(); ++j) {
      if (j) xs << ',';
      write_number(xs, inst.X(i, j));
    }
    xs << '\n';
  }

  std::ofstream ts(target_path);
  if (!ts) throw Error(ErrorCode::ConfigError, "cannot open " + target_path.string());
  ts << "index,y,beta\n";
  const Eigen::Index rows = std::max(inst.n(), inst.p());
  for (Eigen::Index i = 0; i < rows; ++i) {
    ts << i << ',';
    if (i < inst.n()) write_number(ts, inst.y[i]);
    ts << ',';
    if (i < inst.p()) write_number(ts, inst.beta[i]);
    ts << '\n';
  }
}

}  // namespace ensemble_ols
