#include "ensemble_ols/experiments.hpp"

#include "ensemble_ols/datagen.hpp"
#include "ensemble_ols/error.hpp"
#include "ensemble_ols/estimators.hpp"
#include "ensemble_ols/montecarlo.hpp"
#include "ensemble_ols/risk_theory.hpp"
#include "ensemble_ols/sampling.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace ensemble_ols {

namespace {

using json = nlohmann::json;

std::vector<std::int64_t> powers_of_two(std::int64_t max) {
  std::vector<std::int64_t> out;
  for (std::int64_t k = 1; k <= max; k *= 2) out.push_back(k);
  return out;
}

[[noreturn]] void config_error(const std::string& message) { throw Error(ErrorCode::ConfigError, message); }

template <class T>
T read_key(const json& value, const std::string& key) {
  try {
    return value.get<T>();
  } catch (const json::exception&) {
    config_error("bad value for '" + key + "': " + value.dump());
  }
}

std::string status_of(bool skipped) { return skipped ? "skipped" : "ok"; }

std::string cell(double value, bool skipped) { return skipped ? std::string() : format_number(value); }

bool sizes_feasible(double alpha, double eta, std::int64_t n, std::int64_t p) {
  if (!(alpha > 0.0 && alpha <= 1.0 && eta > 0.0 && eta <= 1.0)) return false;
  const auto s = fixed_subset_size(alpha, p);
  const auto t = fixed_subset_size(eta, n);
  return s >= 1 && s < t - 1;
}

std::vector<ConvergenceRow> simulate(const ExperimentConfig& cfg, std::int64_t p, double sigma, double alpha,
                                     double eta, std::span<const std::int64_t> k_grid) {
  ProblemSpec spec;
  spec.n = cfg.n;
  spec.p = p;
  spec.sigma = sigma;
  spec.seed = cfg.seed;
  SubsampleScheme scheme;
  scheme.alpha = alpha;
  scheme.eta = eta;
  return risk_convergence_sim(spec, scheme, k_grid, cfg.trials, cfg.threads).rows;
}

ValidationCheck z_check(std::string group, std::string name, const MCReport& report, json context) {
  ValidationCheck c;
  c.group = std::move(group);
  c.name = std::move(name);
  c.value = report.z_score ? std::abs(*report.z_score) : 0.0;
  c.threshold = kZLimit;
  c.passed = report.within(kZLimit);
  c.detail = std::move(context);
  c.detail["report"] = json(report);
  return c;
}

ValidationCheck tolerance_check(std::string group, std::string name, double value, double threshold,
                                json detail = json::object()) {
  ValidationCheck c;
  c.group = std::move(group);
  c.name = std::move(name);
  c.value = value;
  c.threshold = threshold;
  c.passed = std::isfinite(value) && value <= threshold;
  c.detail = std::move(detail);
  return c;
}

void append_pair_terms(ValidationSummary& out, const ExperimentConfig& cfg) {
  const std::vector<PairSizes> grid = {
      {.s_ii = 5, .t_ii = 40, .s_cap = 3, .sc_cap = 3, .n = 40, .p = 10},
      {.s_ii = 4, .t_ii = 45, .s_cap = 2, .sc_cap = 6, .n = 60, .p = 12},
      {.s_ii = 6, .t_ii = 30, .s_cap = 2, .sc_cap = 10, .n = 50, .p = 20},
  };
  for (const auto& sizes : grid) {
    ProblemSpec spec;
    spec.n = sizes.n;
    spec.p = sizes.p;
    spec.sigma = 1.0;
    spec.seed = cfg.seed;
    const auto r = estimate_pair_terms(spec, sizes, cfg.trials, cfg.threads);
    const json ctx = {{"n", sizes.n},         {"p", sizes.p},          {"s", sizes.s_ii},
                      {"t", sizes.t_ii},      {"s_cap", sizes.s_cap}, {"sc_cap", sizes.sc_cap}};
    const std::string tag = "n" + std::to_string(sizes.n) + "_p" + std::to_string(sizes.p) + "_s" +
                            std::to_string(sizes.s_ii) + "_t" + std::to_string(sizes.t_ii);
    out.checks.push_back(z_check("pair_terms", "bias_same/" + tag, r.bias_same, ctx));
    out.checks.push_back(z_check("pair_terms", "bias_distinct/" + tag, r.bias_distinct, ctx));
    out.checks.push_back(z_check("pair_terms", "variance_same/" + tag, r.variance_same, ctx));
    out.checks.push_back(z_check("pair_terms", "variance_distinct/" + tag, r.variance_distinct, ctx));
  }
}

void append_identities(ValidationSummary& out, const ExperimentConfig& cfg) {
  IdentityCheckOptions opts;
  opts.trials = cfg.identity_trials;
  opts.seed = cfg.seed;
  opts.threads = cfg.threads;
  opts.wishart = false;
  auto checks = lemma_identity_checks(30, 10, 4, opts);

  IdentityCheckOptions wishart;
  wishart.trials = cfg.identity_trials;
  wishart.seed = cfg.seed;
  wishart.threads = cfg.threads;
  wishart.subselect_smaller = false;
  wishart.subselect_larger = false;
  for (auto& c : lemma_identity_checks(20, 10, 5, wishart)) checks.push_back(std::move(c));

  for (const auto& c : checks) {
    ValidationCheck v;
    v.group = "identities";
    v.name = c.name;
    v.value = c.max_abs_z;
    v.threshold = kZLimit;
    v.passed = c.skipped || c.max_abs_z <= kZLimit;
    v.detail = {{"rows", c.rows}, {"cols", c.cols}, {"skipped", c.skipped}, {"note", c.note}};
    if (!c.skipped) v.detail["worst"] = json(c.worst);
    out.checks.push_back(std::move(v));
  }
}

void append_finite_to_limit(ValidationSummary& out) {
  constexpr std::int64_t n = 20'000;
  constexpr double tolerance = 1e-2;
  double worst = 0.0;
  json cases = json::array();
  for (double gamma : {0.5, 1.0}) {
    for (double alpha : {0.2, 0.4}) {
      for (double eta : {0.6, 1.0}) {
        const auto p = static_cast<std::int64_t>(std::llround(gamma * static_cast<double>(n)));
        PairSizes sizes;
        sizes.n = n;
        sizes.p = p;
        sizes.s_ii = fixed_subset_size(alpha, p);
        sizes.t_ii = fixed_subset_size(eta, n);
        sizes.s_cap = std::llround(alpha * alpha * static_cast<double>(p));
        sizes.sc_cap = p - 2 * sizes.s_ii + sizes.s_cap;
        TheoryQuery q;
        q.alpha = alpha;
        q.eta = eta;
        q.gamma = gamma;
        q.sigma = 1.0;
        for (auto kind : {RiskComponent::Bias, RiskComponent::Variance}) {
          for (bool same : {true, false}) {
            const double finite = finite_pair_term(kind, same, sizes, q.sigma, 1.0);
            const double limit = limiting_pair_term(kind, same, q);
            const double rel = std::abs(finite - limit) / std::max(std::abs(limit), 1e-300);
            worst = std::max(worst, rel);
            cases.push_back({{"gamma", gamma},
                             {"alpha", alpha},
                             {"eta", eta},
                             {"term", std::string(kind == RiskComponent::Bias ? "bias" : "variance") +
                                          (same ? "_same" : "_distinct")},
                             {"finite", finite},
                             {"limit", limit}});
          }
        }
      }
    }
  }
  out.checks.push_back(
      tolerance_check("finite_to_limit", "max_relative_gap_n20000", worst, tolerance, {{"cases", cases}}));
}

void append_closed_form(ValidationSummary& out) {
  const auto gammas = log_grid(0.1, 10.0, 20);
  const auto sigmas = log_grid(0.05, 10.0, 20);
  double shrink = 0.0, ridge = 0.0, quadratic = 0.0;
  for (double g : gammas) {
    for (double s : sigmas) {
      const double a = optimal_alpha(g, s);
      const double r = large_ensemble_risk(a, g, s);
      shrink = std::max(shrink, std::abs(r - (1.0 - a)));
      ridge = std::max(ridge, std::abs(r - optimal_ridge_risk(g, s)));
      quadratic = std::max(quadratic, std::abs(a * a * g - a * (g * (s * s + 1.0) + 1.0) + 1.0));
    }
  }
  out.checks.push_back(tolerance_check("closed_form", "risk_at_alpha_star_equals_one_minus_alpha", shrink,
                                       kIdentityTolerance));
  out.checks.push_back(
      tolerance_check("closed_form", "risk_at_alpha_star_equals_ridge", ridge, kIdentityTolerance));
  out.checks.push_back(
      tolerance_check("closed_form", "alpha_star_quadratic_residual", quadratic, kIdentityTolerance));

  // Finite-k risk strictly decreasing in k while alpha eta < 1.
  std::int64_t violations = 0;
  for (double g : {0.5, 1.0, 2.0}) {
    for (double a : {0.1, 0.25, 0.4}) {
      for (double eta : {0.9, 1.0}) {
        if (!(eta > a * g) || !(a * a * g < 1.0)) continue;
        TheoryQuery q{.alpha = a, .eta = eta, .gamma = g, .sigma = 1.0};
        double previous = std::numeric_limits<double>::infinity();
        for (std::int64_t k = 1; k <= 512; k *= 2) {
          q.k = k;
          const double r = ensemble_risk(q);
          if (!(r < previous)) ++violations;
          previous = r;
        }
      }
    }
  }
  out.checks.push_back(
      tolerance_check("closed_form", "risk_decreasing_in_k_violations", static_cast<double>(violations), 0.0));
}

void append_dropout(ValidationSummary& out, const ExperimentConfig& cfg) {
  auto rng = RandomStream::derive(cfg.seed, StreamTag::Experiment, 0);
  Eigen::MatrixXd X(50, 20);
  rng.fill_normal(X);
  Eigen::VectorXd beta(20), noise(50);
  rng.fill_normal(beta);
  rng.fill_normal(noise);
  const Eigen::VectorXd y = X * beta + noise;

  Eigen::VectorXd keep(20);
  for (Eigen::Index j = 0; j < keep.size(); ++j) keep[j] = 0.3 + 0.6 * rng.uniform();

  const auto uniform = dropout_descent_oracle(X, y, Eigen::VectorXd::Constant(20, 0.6));
  const double uniform_gap = (uniform.coef - fit_dropout(X, y, 0.6)).cwiseAbs().maxCoeff();
  out.checks.push_back(tolerance_check("dropout", "closed_form_vs_descent_alpha_0.6",
                                       uniform.converged ? uniform_gap : INFINITY, kDropoutTolerance,
                                       {{"iterations", uniform.iterations}, {"converged", uniform.converged}}));

  const auto general = dropout_descent_oracle(X, y, keep);
  const double general_gap = (general.coef - fit_generalized_dropout(X, y, keep, false)).cwiseAbs().maxCoeff();
  out.checks.push_back(tolerance_check("dropout", "generalized_closed_form_vs_descent",
                                       general.converged ? general_gap : INFINITY, kDropoutTolerance,
                                       {{"iterations", general.iterations}, {"converged", general.converged}}));
}

}  // namespace

std::string_view to_string(ExperimentName name) noexcept {
  switch (name) {
    case ExperimentName::Fig2: return "fig2";
    case ExperimentName::Fig3: return "fig3";
    case ExperimentName::Fig4: return "fig4";
    case ExperimentName::Validate: return "validate";
  }
  return "unknown";
}

ExperimentName parse_experiment_name(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "fig2" || lower == "2") return ExperimentName::Fig2;
  if (lower == "fig3" || lower == "3") return ExperimentName::Fig3;
  if (lower == "fig4" || lower == "4") return ExperimentName::Fig4;
  if (lower == "validate") return ExperimentName::Validate;
  config_error("unknown experiment '" + std::string(text) + "'");
}

ExperimentConfig ExperimentConfig::defaults(ExperimentName name) {
  ExperimentConfig cfg;
  cfg.name = name;
  cfg.k_grid = powers_of_two(256);
  switch (name) {
    case ExperimentName::Fig2:
      cfg.trials = 50;
      cfg.gamma_list = {0.5, 1.0, 2.0};
      break;
    case ExperimentName::Fig3:
      cfg.trials = 100;
      cfg.p = 400;
      cfg.sigma_grid = log_grid(0.1, 10.0, 9);
      break;
    case ExperimentName::Fig4:
      cfg.gamma = 0.5;
      cfg.sigma_grid = log_grid(0.1, 10.0, 41);
      break;
    case ExperimentName::Validate:
      cfg.trials = 10'000;
      cfg.identity_trials = 100'000;
      break;
  }
  return cfg;
}

void ExperimentConfig::apply_overrides(const json& overrides) {
  if (!overrides.is_object()) config_error("config must be a JSON object");
  for (const auto& [key, value] : overrides.items()) {
    if (key == "name") {
      if (parse_experiment_name(read_key<std::string>(value, key)) != name) {
        config_error("config names experiment '" + value.get<std::string>() + "' but '" +
                     std::string(to_string(name)) + "' was requested");
      }
    } else if (key == "n") {
      n = read_key<std::int64_t>(value, key);
    } else if (key == "p") {
      p = read_key<std::int64_t>(value, key);
    } else if (key == "trials") {
      trials = read_key<std::int64_t>(value, key);
    } else if (key == "identity_trials") {
      identity_trials = read_key<std::int64_t>(value, key);
    } else if (key == "k_grid") {
      k_grid = read_key<std::vector<std::int64_t>>(value, key);
    } else if (key == "gamma_list") {
      gamma_list = read_key<std::vector<double>>(value, key);
    } else if (key == "sigma_grid") {
      sigma_grid = read_key<std::vector<double>>(value, key);
    } else if (key == "sigma") {
      sigma = read_key<double>(value, key);
    } else if (key == "gamma") {
      gamma = read_key<double>(value, key);
    } else if (key == "seed") {
      seed = read_key<std::uint64_t>(value, key);
    } else if (key == "output_dir") {
      output_dir = read_key<std::string>(value, key);
    } else if (key == "threads") {
      threads = read_key<unsigned>(value, key);
    } else {
      config_error("unknown config key '" + key + "'");
    }
  }
  validate();
}

void ExperimentConfig::validate() const {
  if (trials < 1) config_error("trials must be positive");
  if (identity_trials < 1) config_error("identity_trials must be positive");
  if (n < 3) config_error("n must be at least 3");
  if (p < 1) config_error("p must be positive");
  if (k_grid.empty()) config_error("k_grid must not be empty");
  for (std::size_t i = 0; i < k_grid.size(); ++i) {
    if (k_grid[i] < 1 || (i > 0 && k_grid[i] <= k_grid[i - 1])) {
      config_error("k_grid must be positive and strictly increasing");
    }
  }
  if (name == ExperimentName::Fig2 && gamma_list.empty()) config_error("gamma_list must not be empty");
  for (double g : gamma_list) {
    if (!(g > 0.0) || !std::isfinite(g)) config_error("gamma_list entries must be positive");
  }
  if ((name == ExperimentName::Fig3 || name == ExperimentName::Fig4) && sigma_grid.empty()) {
    config_error("sigma_grid must not be empty");
  }
  for (double s : sigma_grid) {
    if (!(s >= 0.0) || !std::isfinite(s)) config_error("sigma_grid entries must be non-negative");
  }
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) config_error("sigma must be non-negative");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) config_error("gamma must be positive");
  if (output_dir.empty()) config_error("output_dir must not be empty");
}

json ExperimentConfig::canonical_json() const {
  json out = {{"name", std::string(to_string(name))}, {"seed", seed}};
  switch (name) {
    case ExperimentName::Fig2:
      out.update({{"n", n}, {"trials", trials}, {"k_grid", k_grid}, {"gamma_list", gamma_list}, {"sigma", sigma}});
      break;
    case ExperimentName::Fig3:
      out.update({{"n", n}, {"p", p}, {"trials", trials}, {"k_grid", k_grid}, {"sigma_grid", sigma_grid}});
      break;
    case ExperimentName::Fig4:
      out.update({{"gamma", gamma}, {"sigma_grid", sigma_grid}});
      break;
    case ExperimentName::Validate:
      out.update({{"trials", trials}, {"identity_trials", identity_trials}});
      break;
  }
  return out;
}

std::string ExperimentConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical_json().dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<double> log_grid(double lo, double hi, std::size_t count) {
  if (!(lo > 0.0 && hi >= lo) || count == 0) throw Error(ErrorCode::DomainError, "log_grid needs 0 < lo <= hi");
  if (count == 1) return {lo};
  std::vector<double> out(count);
  const double a = std::log10(lo), b = std::log10(hi);
  for (std::size_t i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(count - 1);
    out[i] = std::pow(10.0, a + (b - a) * t);
  }
  out.front() = lo;
  out.back() = hi;
  return out;
}

std::string format_number(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  return buf;
}

std::string Table::to_csv() const {
  std::string out;
  auto line = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out;
}

// ---------------------------------------------------------------------------
// Figures

std::vector<Figure2Row> run_figure2(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<Figure2Row> out;
  for (double gamma : cfg.gamma_list) {
    const auto p = static_cast<std::int64_t>(std::llround(gamma * static_cast<double>(cfg.n)));
    const double alpha = optimal_alpha(gamma, cfg.sigma);
    const double ridge = optimal_ridge_risk(gamma, cfg.sigma);
    const std::pair<const char*, double> modes[] = {{"full", 1.0}, {"tight", 1.1 * alpha * gamma}};
    for (const auto& [mode, eta] : modes) {
      const bool feasible = p >= 1 && sizes_feasible(alpha, eta, cfg.n, p);
      std::vector<ConvergenceRow> sim;
      if (feasible) sim = simulate(cfg, p, cfg.sigma, alpha, eta, cfg.k_grid);
      for (std::size_t i = 0; i < cfg.k_grid.size(); ++i) {
        Figure2Row row{.gamma = gamma, .eta_mode = mode, .alpha = alpha, .eta = eta, .k = cfg.k_grid[i]};
        row.ridge_target = ridge;
        row.skipped = !feasible;
        if (feasible) {
          row.mean_risk = sim[i].mean_risk;
          row.se = sim[i].se;
        }
        out.push_back(row);
      }
    }
  }
  return out;
}

std::vector<Figure3Row> run_figure3(const ExperimentConfig& cfg) {
  cfg.validate();
  const double gamma = static_cast<double>(cfg.p) / static_cast<double>(cfg.n);
  constexpr double eta = 1.0;
  std::vector<Figure3Row> out;
  for (double sigma : cfg.sigma_grid) {
    const double ridge = optimal_ridge_risk(gamma, sigma);
    const double star = optimal_alpha(gamma, sigma);
    const bool star_ok = sizes_feasible(star, eta, cfg.n, cfg.p);
    std::vector<ConvergenceRow> sim;
    if (star_ok) sim = simulate(cfg, cfg.p, sigma, star, eta, cfg.k_grid);
    for (std::size_t i = 0; i < cfg.k_grid.size(); ++i) {
      Figure3Row row{.sigma = sigma, .alpha_mode = "alpha_star", .alpha = star, .k = cfg.k_grid[i]};
      row.ridge_target = ridge;
      row.skipped = !star_ok;
      if (star_ok) {
        row.mean_risk = sim[i].mean_risk;
        row.se = sim[i].se;
      }
      out.push_back(row);
    }
    for (std::int64_t k : cfg.k_grid) {
      const double tuned = finite_k_optimal_alpha(gamma, sigma, eta, k);
      Figure3Row row{.sigma = sigma, .alpha_mode = "finite_k", .alpha = tuned, .k = k};
      row.ridge_target = ridge;
      row.skipped = !sizes_feasible(tuned, eta, cfg.n, cfg.p);
      if (!row.skipped) {
        const std::int64_t grid[] = {k};
        const auto r = simulate(cfg, cfg.p, sigma, tuned, eta, grid);
        row.mean_risk = r[0].mean_risk;
        row.se = r[0].se;
      }
      out.push_back(row);
    }
  }
  return out;
}

std::vector<Figure4Row> run_figure4(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<Figure4Row> out;
  for (double sigma : cfg.sigma_grid) {
    const std::pair<const char*, double> alphas[] = {{"half_alpha_star", 0.5 * optimal_alpha(cfg.gamma, sigma)},
                                                     {"half", 0.5}};
    for (const auto& [mode, alpha] : alphas) {
      TheoryQuery q{.alpha = alpha, .eta = 1.0, .gamma = cfg.gamma, .sigma = sigma};
      q.mu = 1.0;
      out.push_back({sigma, mode, "one", alpha, 1.0, mu_scaled_risk(q)});
      const auto best = optimal_mu(alpha, cfg.gamma, sigma);
      out.push_back({sigma, mode, "mu_star", alpha, best.mu_star, best.risk});
    }
  }
  return out;
}

Table figure2_table(const std::vector<Figure2Row>& rows, const ExperimentConfig& cfg) {
  Table t;
  t.header = {"gamma", "eta_mode", "k", "mean_risk", "se", "ridge_target", "alpha", "eta", "status", "config_hash",
              "seed"};
  const auto hash = cfg.hash();
  const auto seed = std::to_string(cfg.seed);
  for (const auto& r : rows) {
    t.rows.push_back({format_number(r.gamma), r.eta_mode, std::to_string(r.k), cell(r.mean_risk, r.skipped),
                      cell(r.se, r.skipped), format_number(r.ridge_target), format_number(r.alpha),
                      format_number(r.eta), status_of(r.skipped), hash, seed});
  }
  return t;
}

Table figure3_table(const std::vector<Figure3Row>& rows, const ExperimentConfig& cfg) {
  Table t;
  t.header = {"sigma", "alpha_mode", "k", "mean_risk", "se", "ridge_target", "alpha", "status", "config_hash", "seed"};
  const auto hash = cfg.hash();
  const auto seed = std::to_string(cfg.seed);
  for (const auto& r : rows) {
    t.rows.push_back({format_number(r.sigma), r.alpha_mode, std::to_string(r.k), cell(r.mean_risk, r.skipped),
                      cell(r.se, r.skipped), format_number(r.ridge_target), format_number(r.alpha),
                      status_of(r.skipped), hash, seed});
  }
  return t;
}

Table figure4_table(const std::vector<Figure4Row>& rows, const ExperimentConfig& cfg) {
  Table t;
  t.header = {"sigma", "alpha_mode", "mu_mode", "risk", "alpha", "mu", "config_hash", "seed"};
  const auto hash = cfg.hash();
  const auto seed = std::to_string(cfg.seed);
  for (const auto& r : rows) {
    t.rows.push_back({format_number(r.sigma), r.alpha_mode, r.mu_mode, format_number(r.risk), format_number(r.alpha),
                      format_number(r.mu), hash, seed});
  }
  return t;
}

// ---------------------------------------------------------------------------
// Validation

bool ValidationSummary::passed() const noexcept {
  return std::all_of(checks.begin(), checks.end(), [](const ValidationCheck& c) { return c.passed; });
}

Table ValidationSummary::table(const ExperimentConfig& cfg) const {
  Table t;
  t.header = {"group", "check", "value", "threshold", "status", "config_hash", "seed"};
  const auto hash = cfg.hash();
  const auto seed = std::to_string(cfg.seed);
  for (const auto& c : checks) {
    t.rows.push_back({c.group, c.name, format_number(c.value), format_number(c.threshold), c.passed ? "pass" : "fail",
                      hash, seed});
  }
  return t;
}

json ValidationSummary::to_json(const ExperimentConfig& cfg) const {
  json list = json::array();
  for (const auto& c : checks) {
    list.push_back({{"group", c.group},
                    {"check", c.name},
                    {"value", std::isfinite(c.value) ? json(c.value) : json(nullptr)},
                    {"threshold", c.threshold},
                    {"passed", c.passed},
                    {"detail", c.detail}});
  }
  return {{"config", cfg.canonical_json()}, {"config_hash", cfg.hash()}, {"passed", passed()}, {"checks", list}};
}

ValidationSummary run_validation(const ExperimentConfig& cfg) {
  cfg.validate();
  ValidationSummary out;
  append_closed_form(out);
  append_finite_to_limit(out);
  append_dropout(out, cfg);
  append_pair_terms(out, cfg);
  append_identities(out, cfg);
  return out;
}

void write_experiment_outputs(const ExperimentConfig& cfg, const std::string& file_name, const Table& table,
                              const std::vector<std::string>& extra_files) {
  const std::filesystem::path dir(cfg.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) config_error("cannot create output directory '" + cfg.output_dir + "': " + ec.message());

  auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) config_error("cannot write '" + (dir / name).string() + "'");
    f << body;
  };
  write(file_name, table.to_csv());

  json files = json::array({file_name});
  for (const auto& f : extra_files) files.push_back(f);
  const json manifest = {{"experiment", std::string(to_string(cfg.name))},
                         {"config", cfg.canonical_json()},
                         {"config_hash", cfg.hash()},
                         {"seed", cfg.seed},
                         {"files", files}};
  write("manifest.json", manifest.dump(2) + "\n");
}

}  // namespace ensemble_ols
