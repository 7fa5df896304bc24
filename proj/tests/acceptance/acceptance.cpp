// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include "cli.hpp"

#include "ensemble_ols/estimators.hpp"
#include "ensemble_ols/experiments.hpp"
#include "ensemble_ols/montecarlo.hpp"
#include "ensemble_ols/risk_theory.hpp"
#include "ensemble_ols/sampling.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

using namespace ensemble_ols;

namespace {

constexpr std::uint64_t kSeed = 42;
constexpr double kZ = 4.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

std::string z_text(const MCReport& r) {
  return fmt("%.6g (z=%+.2f)", r.estimate, r.z_score ? *r.z_score : 0.0);
}

// 1. Pairwise terms at n=40, p=10, |S|=5, |T|=20, s_cap=3, sc_cap=3.
Outcome pair_terms() {
  const auto start = std::chrono::steady_clock::now();
  ProblemSpec spec{.n = 40, .p = 10, .sigma = 1.0, .seed = kSeed};
  const PairSizes sizes{.s_ii = 5, .t_ii = 20, .s_cap = 3, .sc_cap = 3, .n = 40, .p = 10};
  const auto r = estimate_pair_terms(spec, sizes, 10'000);
  const double elapsed = seconds_since(start);
  const bool ok = r.bias_same.within(kZ) && r.bias_distinct.within(kZ) && r.variance_same.within(kZ) &&
                  r.variance_distinct.within(kZ) && elapsed <= 120.0;
  return {ok, "bias_ii=" + z_text(r.bias_same) + " bias_ij=" + z_text(r.bias_distinct) +
                  " var_ii=" + z_text(r.variance_same) + " var_ij=" + z_text(r.variance_distinct) +
                  fmt(" time=%.1fs", elapsed)};
}

// 2. Closed-form identities on a 20 x 20 log grid.
Outcome closed_form() {
  const auto start = std::chrono::steady_clock::now();
  double shrink = 0.0, ridge = 0.0, quadratic = 0.0;
  for (double g : log_grid(0.1, 10.0, 20)) {
    for (double s : log_grid(0.05, 10.0, 20)) {
      const double a = optimal_alpha(g, s);
      const double r = large_ensemble_risk(a, g, s);
      shrink = std::max(shrink, std::abs(r - (1.0 - a)));
      ridge = std::max(ridge, std::abs(r - optimal_ridge_risk(g, s)));
      quadratic = std::max(quadratic, std::abs(a * a * g - a * (g * (s * s + 1.0) + 1.0) + 1.0));
    }
  }
  const double elapsed = seconds_since(start);
  const bool ok = shrink <= 1e-12 && ridge <= 1e-12 && quadratic <= 1e-12 && elapsed < 1.0;
  return {ok, fmt("max|R-(1-a*)|=%.2e max|R-ridge|=%.2e max residual=%.2e time=%.3fs", shrink, ridge, quadratic,
                  elapsed)};
}

struct Figure2Data {
  std::vector<Figure2Row> rows;
  double seconds = 0.0;
};

Figure2Data figure2() {
  const auto start = std::chrono::steady_clock::now();
  auto cfg = ExperimentConfig::defaults(ExperimentName::Fig2);
  cfg.seed = kSeed;
  Figure2Data out{run_figure2(cfg), 0.0};
  out.seconds = seconds_since(start);
  return out;
}

const Figure2Row* find_row(const std::vector<Figure2Row>& rows, double gamma, const std::string& mode,
                           std::int64_t k) {
  for (const auto& r : rows)
    if (r.gamma == gamma && r.eta_mode == mode && r.k == k) return &r;
  return nullptr;
}

// 3. Figure 2 at desk scale.
Outcome figure2_reproduction(const Figure2Data& data) {
  bool ok = data.seconds <= 900.0;
  std::string detail;
  for (double gamma : {0.5, 1.0, 2.0}) {
    const auto* last = find_row(data.rows, gamma, "full", 256);
    if (!last || last->skipped) return {false, fmt("gamma=%g: missing k=256 row", gamma)};
    const double rel = std::abs(last->mean_risk / last->ridge_target - 1.0);
    ok = ok && rel <= 0.05;
    detail += fmt("gamma=%g k=256 %.6g vs %.6g (%.2f%%); ", gamma, last->mean_risk, last->ridge_target, 100 * rel);
    for (std::int64_t k = 1; k <= 64; k *= 2) {
      const auto* full = find_row(data.rows, gamma, "full", k);
      const auto* tight = find_row(data.rows, gamma, "tight", k);
      if (!full || !tight || tight->skipped) {
        ok = false;
        detail += fmt("gamma=%g k=%lld tight row missing; ", gamma, static_cast<long long>(k));
        continue;
      }
      const double margin = 2.0 * std::hypot(full->se, tight->se);
      if (!(tight->mean_risk - full->mean_risk >= margin)) {
        ok = false;
        detail += fmt("gamma=%g k=%lld tight %.6g not above full %.6g by %.3g; ", gamma, static_cast<long long>(k),
                      tight->mean_risk, full->mean_risk, margin);
      }
    }
  }
  return {ok, detail + fmt("time=%.1fs", data.seconds)};
}

// 4. Finite-k risk at alpha=0.25, eta=1, gamma=2, sigma=1, k=10.
Outcome finite_k() {
  TheoryQuery q{.alpha = 0.25, .eta = 1.0, .gamma = 2.0, .sigma = 1.0};
  q.k = std::int64_t{10};
  const double theory = ensemble_risk(q);
  const std::int64_t grid[] = {10};
  const auto sim = risk_convergence_sim({.n = 200, .p = 400, .sigma = 1.0, .seed = kSeed},
                                        {.alpha = 0.25, .eta = 1.0}, grid, 200);
  const double z = (sim.rows[0].mean_risk - theory) / sim.rows[0].se;
  return {std::abs(z) <= kZ && std::abs(theory - 0.957143) < 1e-6,
          fmt("mc=%.6g se=%.3g theory=%.6g z=%+.2f", sim.rows[0].mean_risk, sim.rows[0].se, theory, z)};
}

// 5. Risk decreasing in k: exact on the theory side, up to 2 SE in simulation.
Outcome monotonicity(const Figure2Data& data) {
  std::int64_t checked = 0, violations = 0;
  for (double g : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    for (double a : {0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9}) {
      for (double eta : {0.3, 0.5, 0.8, 1.0}) {
        for (double s : {0.1, 1.0, 5.0}) {
          if (!(a * eta < 1.0) || !(eta > a * g) || !(a * a * g < 1.0)) continue;
          TheoryQuery q{.alpha = a, .eta = eta, .gamma = g, .sigma = s};
          double previous = std::numeric_limits<double>::infinity();
          for (std::int64_t k = 1; k <= 1024; ++k) {
            q.k = k;
            const double r = ensemble_risk(q);
            ++checked;
            if (!(r < previous)) ++violations;
            previous = r;
          }
        }
      }
    }
  }
  std::int64_t mc_pairs = 0, mc_violations = 0;
  for (double gamma : {0.5, 1.0, 2.0}) {
    for (const char* mode : {"full", "tight"}) {
      const Figure2Row* prev = nullptr;
      for (const auto& r : data.rows) {
        if (r.gamma != gamma || r.eta_mode != mode || r.skipped) continue;
        if (prev) {
          ++mc_pairs;
          if (r.mean_risk > prev->mean_risk + 2.0 * std::hypot(r.se, prev->se)) ++mc_violations;
        }
        prev = &r;
      }
    }
  }
  return {violations == 0 && mc_violations == 0 && checked > 0 && mc_pairs > 0,
          fmt("theory violations %lld of %lld steps; simulation violations %lld of %lld steps",
              static_cast<long long>(violations), static_cast<long long>(checked),
              static_cast<long long>(mc_violations), static_cast<long long>(mc_pairs))};
}

// 6. Dropout closed forms.
Outcome dropout() {
  auto rng = RandomStream::derive(kSeed, StreamTag::Experiment, 6);
  Eigen::MatrixXd X(50, 20);
  rng.fill_normal(X);
  Eigen::VectorXd beta(20), noise(50);
  rng.fill_normal(beta);
  rng.fill_normal(noise);
  const Eigen::VectorXd y = X * beta + noise;
  const double alpha = 0.6;

  const auto descent = dropout_descent_oracle(X, y, Eigen::VectorXd::Constant(20, alpha));
  const double descent_gap = (descent.coef - fit_dropout(X, y, alpha)).cwiseAbs().maxCoeff();
  const double uniform_gap =
      (fit_generalized_dropout(X, y, Eigen::VectorXd::Constant(20, alpha), false) - fit_dropout(X, y, alpha))
          .cwiseAbs()
          .maxCoeff();

  const auto inst = generate_problem({.n = 2000, .p = 1000, .sigma = 1.0, .seed = kSeed}, 0);
  const double lambda = 1000.0;
  const Eigen::VectorXd keep = Eigen::VectorXd::Constant(1000, 1.0 / (1.0 + lambda / 2000.0));
  const Eigen::VectorXd ridge = fit_ridge(inst, lambda);
  const double rel = (fit_generalized_dropout(inst, keep, true) - ridge).norm() / ridge.norm();

  const bool ok = descent.converged && descent_gap <= 1e-6 && uniform_gap <= 1e-10 && rel <= 0.05;
  return {ok, fmt("descent gap=%.2e (%lld iterations) uniform generalized gap=%.2e corrected vs ridge(%g)=%.2f%%",
                  descent_gap, static_cast<long long>(descent.iterations), uniform_gap, lambda, 100 * rel)};
}

// 7. Subselection and Wishart identities at 1e5 trials.
Outcome identities() {
  IdentityCheckOptions sub{.trials = 100'000, .seed = kSeed, .wishart = false};
  auto checks = lemma_identity_checks(30, 10, 4, sub);
  IdentityCheckOptions wishart{
      .trials = 100'000, .seed = kSeed, .subselect_smaller = false, .subselect_larger = false};
  for (auto& c : lemma_identity_checks(20, 10, 5, wishart)) checks.push_back(std::move(c));

  bool ok = true;
  std::string detail;
  for (const auto& c : checks) {
    if (c.skipped) {
      ok = false;
      detail += c.name + " skipped; ";
      continue;
    }
    ok = ok && c.max_abs_z <= kZ;
    detail += fmt("%s max|z|=%.2f; ", c.name.c_str(), c.max_abs_z);
    if (c.name == "inverse_wishart_mean") {
      const bool diag = std::abs(c.target(0, 0) - 1.0 / 14.0) < 1e-15;
      ok = ok && diag;
      detail += fmt("diagonal target %.6f; ", c.target(0, 0));
    }
  }
  return {ok, detail};
}

// 8. Same-member variance of min-norm interpolating members at n=p=100, alpha=1, eta=0.5.
Outcome interpolator() {
  const Eigen::Index n = 100, p = 100, t = 50;
  const double sigma = 1.0;
  std::vector<double> values;
  values.reserve(10'000);
  for (std::uint64_t trial = 0; trial < 10'000; ++trial) {
    auto rng = RandomStream::derive(kSeed, StreamTag::Oracle, trial);
    Eigen::MatrixXd X(n, p);
    rng.fill_normal(X);
    const auto pair = draw_fixed_size_pair(p, t, p, n, rng);
    EnsembleFit fit;
    fit.members.push_back({pair, Eigen::VectorXd::Zero(p), false});
    const Eigen::MatrixXd f = assemble_linear_map(fit, X);
    values.push_back(sigma * sigma * f.squaredNorm());
  }
  const double theory = interpolator_variance_term(true, 1.0, 0.5, 1.0, sigma);
  const auto r = MCReport::from_samples(values, theory);
  return {r.within(kZ), fmt("mc=%.6g se=%.3g theory=%.6g z=%+.2f", r.estimate, r.std_error, theory, *r.z_score)};
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

int invoke(const std::vector<std::string>& args, std::string& out) {
  std::vector<const char*> argv = {"ensemble-ols"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), o, e);
  out = o.str();
  return code;
}

// 9. Byte-identical reruns of CLI invocations.
Outcome determinism() {
  const auto root = std::filesystem::temp_directory_path() / "ensemble_ols_acceptance";
  std::filesystem::remove_all(root);
  const std::vector<std::vector<std::string>> invocations = {
      {"theory", "--alpha", "0.25", "--gamma", "2", "--k", "10", "--format", "json"},
      {"simulate", "--n", "60", "--p", "30", "--k", "1,2,8", "--trials", "6", "--seed", "7", "--format", "csv",
       "--output", "@/simulate.csv"},
      {"figure", "2", "--n", "40", "--trials", "3", "--k", "1,4", "--gamma", "0.5,2", "--output-dir", "@"},
      {"figure", "3", "--n", "40", "--p", "60", "--trials", "3", "--k", "1,2", "--sigma", "0.5,2", "--output-dir",
       "@"},
      {"figure", "4", "--output-dir", "@"},
      {"validate", "--trials", "50", "--identity-trials", "50", "--output-dir", "@"},
  };
  std::size_t files = 0;
  for (std::size_t i = 0; i < invocations.size(); ++i) {
    std::string stdout_text[2];
    std::vector<std::filesystem::path> dirs;
    for (int rep = 0; rep < 2; ++rep) {
      const auto dir = root / std::to_string(i) / std::to_string(rep);
      std::filesystem::create_directories(dir);
      dirs.push_back(dir);
      auto args = invocations[i];
      for (auto& a : args) {
        if (a == "@") a = dir.string();
        if (a.starts_with("@/")) a = (dir / a.substr(2)).string();
      }
      const int code = invoke(args, stdout_text[rep]);
      if (code == 2) return {false, "invocation " + invocations[i][0] + " failed with a usage error"};
    }
    if (stdout_text[0] != stdout_text[1]) return {false, "stdout differs for " + invocations[i][0]};
    for (const auto& entry : std::filesystem::directory_iterator(dirs[0])) {
      const auto name = entry.path().filename();
      if (!std::filesystem::exists(dirs[1] / name) || slurp(entry.path()) != slurp(dirs[1] / name)) {
        return {false, "file " + name.string() + " differs for " + invocations[i][0]};
      }
      ++files;
    }
  }
  std::filesystem::remove_all(root);
  return {true, fmt("%zu invocations, stdout and %zu output files identical across reruns", invocations.size(),
                    files)};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* title, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " " << title << ": " << o.detail << std::endl;
  };

  report(1, "pairwise oracle agreement", pair_terms);
  report(2, "closed-form identities", closed_form);
  Figure2Data fig2;
  try {
    fig2 = figure2();
  } catch (const std::exception& e) {
    std::cerr << "figure 2 run failed: " << e.what() << "\n";
  }
  report(3, "figure 2 reproduction", [&] { return figure2_reproduction(fig2); });
  report(4, "finite-k risk", finite_k);
  report(5, "monotonicity in k", [&] { return monotonicity(fig2); });
  report(6, "dropout closed form", dropout);
  report(7, "matrix identity suite", identities);
  report(8, "interpolator variance", interpolator);
  report(9, "CLI determinism", determinism);
  std::cout << (failures == 0 ? "ALL PASS" : fmt("%d criteria failed", failures)) << std::endl;
  return failures == 0 ? 0 : 1;
}
