#include "ensemble_ols/montecarlo.hpp"

#include "ensemble_ols/error.hpp"
#include "ensemble_ols/estimators.hpp"
#include "ensemble_ols/parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace ensemble_ols {

namespace {

std::optional<double> z_against(double estimate, double std_error, std::optional<double> theory) {
  if (!theory) return std::nullopt;
  const double diff = estimate - *theory;
  if (std_error > 0.0) return diff / std_error;
  if (std::abs(diff) <= 1e-12) return 0.0;
  return diff > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
}

}  // namespace

MCReport MCReport::from_moments(double mean, double sample_variance, std::int64_t trials,
                                std::optional<double> theory) {
  MCReport report;
  report.estimate = mean;
  report.trials = trials;
  report.std_error = trials > 0 ? std::sqrt(std::max(0.0, sample_variance) / static_cast<double>(trials)) : 0.0;
  report.theory_value = theory;
  report.z_score = z_against(report.estimate, report.std_error, theory);
  return report;
}

void to_json(nlohmann::json& out, const MCReport& r) {
  auto finite_or_null = [](const std::optional<double>& v) {
    return v && std::isfinite(*v) ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  out = {{"estimate", r.estimate},
         {"std_error", r.std_error},
         {"trials", r.trials},
         {"theory_value", finite_or_null(r.theory_value)},
         {"z_score", finite_or_null(r.z_score)}};
}

MCReport MCReport::from_samples(std::span<const double> samples, std::optional<double> theory) {
  if (samples.empty()) throw Error(ErrorCode::EmptyInput, "no Monte Carlo samples");
  const auto count = static_cast<double>(samples.size());
  const double mean = pairwise_sum(samples) / count;
  std::vector<double> squares(samples.size());
  std::transform(samples.begin(), samples.end(), squares.begin(),
                 [mean](double v) { return (v - mean) * (v - mean); });
  const double variance = samples.size() > 1 ? pairwise_sum(squares) / (count - 1.0) : 0.0;
  return from_moments(mean, variance, static_cast<std::int64_t>(samples.size()), theory);
}

double empirical_risk(const Eigen::VectorXd& beta, const Eigen::VectorXd& beta_hat) {
  if (beta.size() != beta_hat.size()) throw Error(ErrorCode::DimensionMismatch, "beta lengths differ");
  return (beta - beta_hat).squaredNorm();
}

RiskBreakdown bias_variance_decomposition(const Eigen::MatrixXd& f, const Eigen::MatrixXd& X,
                                          const Eigen::VectorXd& beta, double sigma) {
  if (f.rows() != X.cols() || f.cols() != X.rows() || beta.size() != X.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "f must be p x n for an n x p X and a length-p beta");
  }
  RiskBreakdown out;
  out.bias = (beta - f * (X * beta)).squaredNorm();
  out.variance = sigma * sigma * f.squaredNorm();
  out.risk = out.bias + out.variance;
  return out;
}

// ---------------------------------------------------------------------------
// Pairwise terms

namespace {

/// p x n scatter of the member's pseudoinverse, S (T^T X S)^+ T^T.
Eigen::MatrixXd member_map(const Eigen::MatrixXd& X, const IndexList& rows, const IndexList& cols) {
  Eigen::MatrixXd map = Eigen::MatrixXd::Zero(X.cols(), X.rows());
  map(cols, rows) = pseudo_inverse(gather(X, rows, cols)).matrix;
  return map;
}

IndexList sorted_union(IndexList a, const IndexList& b) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  return a;
}

}  // namespace

PairTermReports estimate_pair_terms(const ProblemSpec& spec, const PairSizes& sizes, std::int64_t trials,
                                    unsigned threads) {
  spec.validate();
  sizes.validate();
  if (sizes.n != spec.n || sizes.p != spec.p) {
    throw Error(ErrorCode::InfeasibleSizes, "pair sizes disagree with the problem dimensions");
  }
  if (sizes.p - 2 * sizes.s_ii + sizes.s_cap != sizes.sc_cap) {
    throw Error(ErrorCode::InfeasibleSizes, "sc_cap must equal p - 2 |S| + s_cap for equal-size members");
  }
  if (trials < 2) throw Error(ErrorCode::InfeasibleSizes, "need at least two trials");

  const auto count = static_cast<std::size_t>(trials);
  std::vector<double> bias_same(count), bias_distinct(count), var_same(count), var_distinct(count);
  const double s2 = spec.sigma * spec.sigma;
  const auto s = static_cast<std::size_t>(sizes.s_ii);
  const auto cap = static_cast<std::size_t>(sizes.s_cap);

  parallel_for(count, threads, [&](std::size_t trial) {
    auto rng = RandomStream::derive(spec.seed, StreamTag::Oracle, trial);
    Eigen::MatrixXd X(spec.n, spec.p);
    rng.fill_normal(X);
    const Eigen::VectorXd beta = draw_beta(spec.beta_mode, spec.p, rng);

    // Blocks of one permutation: [S_i n S_j | S_i \ S_j | S_j \ S_i | rest].
    const IndexList perm = random_permutation(spec.p, rng);
    const IndexList shared(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(cap));
    const IndexList only_i(perm.begin() + static_cast<std::ptrdiff_t>(cap), perm.begin() + static_cast<std::ptrdiff_t>(s));
    const IndexList only_j(perm.begin() + static_cast<std::ptrdiff_t>(s),
                           perm.begin() + static_cast<std::ptrdiff_t>(2 * s - cap));
    const IndexList S_i = sorted_union(shared, only_i);
    const IndexList S_j = sorted_union(shared, only_j);
    const IndexList T_i = sample_without_replacement(spec.n, sizes.t_ii, rng);
    const IndexList T_j = sample_without_replacement(spec.n, sizes.t_ii, rng);

    const Eigen::MatrixXd F_i = member_map(X, T_i, S_i);
    const Eigen::MatrixXd F_j = member_map(X, T_j, S_j);
    const Eigen::VectorXd signal = X * beta;
    const Eigen::VectorXd residual_i = beta - F_i * signal;
    const Eigen::VectorXd residual_j = beta - F_j * signal;

    bias_same[trial] = residual_i.squaredNorm();
    bias_distinct[trial] = residual_i.dot(residual_j);
    var_same[trial] = s2 * F_i.squaredNorm();
    var_distinct[trial] = s2 * F_i.cwiseProduct(F_j).sum();
  });

  PairTermReports out;
  const double sigma = spec.sigma;
  out.bias_same = MCReport::from_samples(bias_same, finite_pair_term(RiskComponent::Bias, true, sizes, sigma, 1.0));
  out.bias_distinct =
      MCReport::from_samples(bias_distinct, finite_pair_term(RiskComponent::Bias, false, sizes, sigma, 1.0));
  out.variance_same =
      MCReport::from_samples(var_same, finite_pair_term(RiskComponent::Variance, true, sizes, sigma, 1.0));
  out.variance_distinct =
      MCReport::from_samples(var_distinct, finite_pair_term(RiskComponent::Variance, false, sizes, sigma, 1.0));
  return out;
}

// ---------------------------------------------------------------------------
// Matrix identities

namespace {

/// Entrywise running mean / M2 (Welford), mergeable in a fixed order.
struct MatrixMoments {
  Eigen::MatrixXd mean;
  Eigen::MatrixXd m2;
  std::int64_t count = 0;

  void add(const Eigen::MatrixXd& x) {
    if (count == 0) {
      mean = Eigen::MatrixXd::Zero(x.rows(), x.cols());
      m2 = Eigen::MatrixXd::Zero(x.rows(), x.cols());
    }
    ++count;
    const Eigen::MatrixXd delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta.cwiseProduct(x - mean);
  }

  void merge(const MatrixMoments& other) {
    if (other.count == 0) return;
    if (count == 0) {
      *this = other;
      return;
    }
    const double na = static_cast<double>(count);
    const double nb = static_cast<double>(other.count);
    const Eigen::MatrixXd delta = other.mean - mean;
    mean += delta * (nb / (na + nb));
    m2 += other.m2 + delta.cwiseProduct(delta) * (na * nb / (na + nb));
    count += other.count;
  }
};

enum CheckId : std::size_t {
  kPinvRestriction,
  kCrossVanishes,
  kLargerGram,
  kLargerCross,
  kInverseWishart,
  kGeneralizedInverseWishart,
  kCheckCount
};

constexpr const char* kCheckNames[kCheckCount] = {
    "subselect_smaller_pinv",  "subselect_smaller_cross", "subselect_larger_gram",
    "subselect_larger_cross",  "inverse_wishart_mean",    "generalized_inverse_wishart_mean",
};

IdentityCheck summarize(const char* name, const MatrixMoments& moments, const Eigen::MatrixXd& target) {
  IdentityCheck check;
  check.name = name;
  check.rows = target.rows();
  check.cols = target.cols();
  check.mean = moments.mean;
  check.target = target;
  const double trials = static_cast<double>(moments.count);
  check.std_error = (moments.m2.array().max(0.0) / (trials - 1.0) / trials).sqrt().matrix();

  bool first = true;
  for (Eigen::Index c = 0; c < target.cols(); ++c) {
    for (Eigen::Index r = 0; r < target.rows(); ++r) {
      const double variance = check.std_error(r, c) * check.std_error(r, c) * trials;
      MCReport entry = MCReport::from_moments(check.mean(r, c), variance, moments.count, target(r, c));
      const double z = std::abs(*entry.z_score);
      if (first || z > check.max_abs_z) {
        check.max_abs_z = z;
        check.worst = entry;
        first = false;
      }
    }
  }
  return check;
}

IdentityCheck skipped(const char* name, std::string note) {
  IdentityCheck check;
  check.name = name;
  check.skipped = true;
  check.note = std::move(note);
  return check;
}

/// Pseudoinverse of the rows `rows` of X, scattered into a cols(X) x n matrix.
Eigen::MatrixXd row_subset_pinv(const Eigen::MatrixXd& X, const IndexList& rows) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(X.cols(), X.rows());
  out(Eigen::all, rows) = pseudo_inverse(X(rows, Eigen::all)).matrix;
  return out;
}

}  // namespace

std::vector<IdentityCheck> lemma_identity_checks(Eigen::Index n, Eigen::Index p, Eigen::Index subset_size,
                                                 const IdentityCheckOptions& options) {
  const Eigen::Index s = subset_size;
  if (s < 1 || s > p || n <= s + 1) {
    throw Error(ErrorCode::InfeasibleSizes, "identity checks need 1 <= |S| <= p and n > |S| + 1");
  }
  if (options.trials < 2) throw Error(ErrorCode::InfeasibleSizes, "need at least two trials");
  const Eigen::Index t = options.example_subset_size > 0 ? options.example_subset_size : n / 2;
  if (t > n) throw Error(ErrorCode::InfeasibleSizes, "example subset larger than n");

  std::array<bool, kCheckCount> enabled{};
  std::array<std::string, kCheckCount> skip_note{};
  enabled[kPinvRestriction] = enabled[kCrossVanishes] = options.subselect_smaller;
  enabled[kLargerGram] = enabled[kLargerCross] = options.subselect_larger;
  enabled[kInverseWishart] = enabled[kGeneralizedInverseWishart] = options.wishart;
  for (auto id : {kPinvRestriction, kCrossVanishes}) {
    if (!enabled[id]) continue;
    if (s == p) {
      enabled[id] = false;
      skip_note[id] = "vacuous: |S| = p leaves an empty complement";
    } else if (n <= p) {
      enabled[id] = false;
      skip_note[id] = "requires n > p so that X^+ is a left inverse";
    }
  }
  for (auto id : {kLargerGram, kLargerCross}) {
    if (enabled[id] && t <= s + 1) {
      enabled[id] = false;
      skip_note[id] = "requires |T| > |S| + 1";
    }
  }

  // Fixed fixtures: S, the test function F and the matrix A.
  auto fixture = RandomStream::derive(options.seed, StreamTag::Fixture, 0);
  const IndexList S = sample_without_replacement(p, s, fixture);
  IndexList Sc;
  for (Eigen::Index j = 0, next = 0; j < p; ++j) {
    if (next < s && S[static_cast<std::size_t>(next)] == j) {
      ++next;
    } else {
      Sc.push_back(j);
    }
  }
  Eigen::MatrixXd F(n, s), A(s, s);
  fixture.fill_normal(F);
  fixture.fill_normal(A);

  const std::int64_t trials = options.trials;
  const std::size_t blocks = static_cast<std::size_t>(std::min<std::int64_t>(trials, 256));
  std::vector<std::array<MatrixMoments, kCheckCount>> partial(blocks);

  parallel_for(blocks, options.threads, [&](std::size_t block) {
    const auto begin = static_cast<std::int64_t>(block) * trials / static_cast<std::int64_t>(blocks);
    const auto end = static_cast<std::int64_t>(block + 1) * trials / static_cast<std::int64_t>(blocks);
    auto& acc = partial[block];
    for (std::int64_t trial = begin; trial < end; ++trial) {
      auto rng = RandomStream::derive(options.seed, StreamTag::Oracle, static_cast<std::uint64_t>(trial));

      if (enabled[kPinvRestriction] || enabled[kCrossVanishes]) {
        Eigen::MatrixXd X(n, p);
        rng.fill_normal(X);
        const Eigen::MatrixXd X_pinv = pseudo_inverse(X).matrix;  // p x n
        const Eigen::MatrixXd restricted = X_pinv(S, Eigen::all);
        if (enabled[kPinvRestriction]) {
          acc[kPinvRestriction].add(restricted - pseudo_inverse(X(Eigen::all, S)).matrix);
        }
        if (enabled[kCrossVanishes]) {
          acc[kCrossVanishes].add(X(Eigen::all, Sc).transpose() * F * restricted);
        }
      }

      Eigen::MatrixXd XS(n, s);
      rng.fill_normal(XS);
      const Eigen::MatrixXd gram_inverse = (XS.transpose() * XS).inverse();

      if (enabled[kLargerGram] || enabled[kLargerCross]) {
        const IndexList T1 = sample_without_replacement(n, t, rng);
        const IndexList T2 = sample_without_replacement(n, t, rng);
        const Eigen::MatrixXd P1 = row_subset_pinv(XS, T1);
        if (enabled[kLargerGram]) {
          acc[kLargerGram].add(P1 * row_subset_pinv(XS, T2).transpose() - gram_inverse);
        }
        if (enabled[kLargerCross]) {
          Eigen::MatrixXd Y(n, s);
          rng.fill_normal(Y);
          const Eigen::MatrixXd Q2 = row_subset_pinv(Y, T2);
          const Eigen::MatrixXd full = pseudo_inverse(XS).matrix.transpose() * A * pseudo_inverse(Y).matrix;
          acc[kLargerCross].add(P1.transpose() * A * Q2 - full);
        }
      }

      if (enabled[kInverseWishart]) acc[kInverseWishart].add(gram_inverse);
      if (enabled[kGeneralizedInverseWishart]) {
        acc[kGeneralizedInverseWishart].add(pseudo_inverse(XS * XS.transpose()).matrix);
      }
    }
  });

  std::array<MatrixMoments, kCheckCount> total;
  for (const auto& block : partial) {
    for (std::size_t id = 0; id < kCheckCount; ++id) total[id].merge(block[id]);
  }

  const double nd = static_cast<double>(n);
  const double sd = static_cast<double>(s);
  std::array<Eigen::MatrixXd, kCheckCount> targets = {
      Eigen::MatrixXd::Zero(s, n),
      Eigen::MatrixXd::Zero(p - s, n),
      Eigen::MatrixXd::Zero(s, s),
      Eigen::MatrixXd::Zero(n, n),
      Eigen::MatrixXd::Identity(s, s) / (nd - sd - 1.0),
      Eigen::MatrixXd::Identity(n, n) * (sd / (nd * (nd - sd - 1.0))),
  };

  std::vector<IdentityCheck> out;
  for (std::size_t id = 0; id < kCheckCount; ++id) {
    const bool requested = (id <= kCrossVanishes && options.subselect_smaller) ||
                           ((id == kLargerGram || id == kLargerCross) && options.subselect_larger) ||
                           (id >= kInverseWishart && options.wishart);
    if (!requested) continue;
    if (!enabled[id]) {
      out.push_back(skipped(kCheckNames[id], skip_note[id]));
      continue;
    }
    out.push_back(summarize(kCheckNames[id], total[id], targets[id]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Risk versus ensemble size

ConvergenceResult risk_convergence_sim(const ProblemSpec& spec, const SubsampleScheme& scheme,
                                       std::span<const std::int64_t> k_grid, std::int64_t trials,
                                       unsigned threads) {
  spec.validate();
  scheme.validate();
  if (k_grid.empty()) throw Error(ErrorCode::EmptyInput, "empty k grid");
  if (trials < 2) throw Error(ErrorCode::InvalidDimensions, "need at least two trials");
  std::vector<std::int64_t> grid(k_grid.begin(), k_grid.end());
  if (!std::is_sorted(grid.begin(), grid.end()) || std::adjacent_find(grid.begin(), grid.end()) != grid.end() ||
      grid.front() < 1) {
    throw Error(ErrorCode::InvalidDimensions, "k grid must be strictly increasing positive integers");
  }
  const std::int64_t k_max = grid.back();

  ConvergenceResult result;
  result.samples.resize(trials, static_cast<Eigen::Index>(grid.size()));

  parallel_for(static_cast<std::size_t>(trials), threads, [&](std::size_t trial) {
    const ProblemInstance inst = generate_problem(spec, trial);
    auto rng = RandomStream::derive(spec.seed, StreamTag::Subsets, trial);
    std::vector<SubsetPair> pairs;
    pairs.reserve(static_cast<std::size_t>(k_max));
    for (std::int64_t i = 0; i < k_max; ++i) pairs.push_back(draw_subsets(scheme, spec.p, spec.n, rng));

    Eigen::VectorXd running = Eigen::VectorXd::Zero(spec.p);
    std::size_t next = 0;
    for (std::int64_t i = 0; i < k_max; ++i) {
      running += fit_subsampled_ols(inst.X, inst.y, pairs[static_cast<std::size_t>(i)]).coef;
      if (i + 1 == grid[next]) {
        const Eigen::VectorXd averaged = running / static_cast<double>(i + 1);
        result.samples(static_cast<Eigen::Index>(trial), static_cast<Eigen::Index>(next)) =
            empirical_risk(inst.beta, averaged);
        ++next;
      }
    }
  });

  for (std::size_t g = 0; g < grid.size(); ++g) {
    const Eigen::VectorXd column = result.samples.col(static_cast<Eigen::Index>(g));
    const MCReport report = MCReport::from_samples(std::span<const double>(column.data(), column.size()));
    result.rows.push_back({grid[g], report.estimate, report.std_error, trials});
  }
  return result;
}

// ---------------------------------------------------------------------------
// Dropout oracle

DescentResult dropout_descent_oracle(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& keep,
                                     double gradient_tolerance, std::int64_t max_iterations) {
  if (X.rows() != y.size() || keep.size() != X.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "dropout oracle shapes disagree");
  }
  const Eigen::Index p = X.cols();
  const Eigen::MatrixXd gram = X.transpose() * X;
  Eigen::MatrixXd inclusion = keep * keep.transpose();
  inclusion.diagonal() = keep;

  // E||X S S^T b - y||^2 = b^T (P o G) b - 2 (keep o X^T y)^T b + ||y||^2
  const Eigen::MatrixXd hessian = 2.0 * inclusion.cwiseProduct(gram);
  const Eigen::VectorXd linear = 2.0 * keep.cwiseProduct(X.transpose() * y);

  double lipschitz = 0.0;
  for (Eigen::Index j = 0; j < p; ++j) lipschitz = std::max(lipschitz, hessian.row(j).cwiseAbs().sum());
  const double step = 1.0 / lipschitz;

  DescentResult out;
  out.coef = Eigen::VectorXd::Zero(p);
  const double scale = std::max(1.0, linear.norm());
  for (; out.iterations < max_iterations; ++out.iterations) {
    const Eigen::VectorXd gradient = hessian * out.coef - linear;
    if (gradient.norm() <= gradient_tolerance * scale) {
      out.converged = true;
      break;
    }
    out.coef -= step * gradient;
  }
  return out;
}

}  // namespace ensemble_ols
