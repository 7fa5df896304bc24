#include "cli.hpp"

#include "ensemble_ols/datagen.hpp"
#include "ensemble_ols/error.hpp"
#include "ensemble_ols/estimators.hpp"
#include "ensemble_ols/experiments.hpp"
#include "ensemble_ols/montecarlo.hpp"
#include "ensemble_ols/risk_theory.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace py = pybind11;
using namespace ensemble_ols;

namespace {

PyObject* error_type = nullptr;

py::dict report_dict(const MCReport& r) {
  py::dict d;
  d["estimate"] = r.estimate;
  d["std_error"] = r.std_error;
  d["trials"] = r.trials;
  d["theory_value"] = r.theory_value ? py::cast(*r.theory_value) : py::none();
  d["z_score"] = r.z_score ? py::cast(*r.z_score) : py::none();
  return d;
}

TheoryQuery make_query(double alpha, double eta, double gamma, double sigma, std::optional<std::int64_t> k,
                       double mu) {
  TheoryQuery q{.alpha = alpha, .eta = eta, .gamma = gamma, .sigma = sigma};
  if (k) q.k = *k;
  q.mu = mu;
  return q;
}

BetaMode parse_beta_mode(const std::string& text) {
  if (text == "unit_sphere") return BetaMode::UnitSphere;
  if (text == "gaussian_prior") return BetaMode::GaussianPrior;
  throw Error(ErrorCode::ConfigError, "beta_mode must be 'unit_sphere' or 'gaussian_prior'");
}

ProblemSpec make_spec(Eigen::Index n, Eigen::Index p, double sigma, const std::string& beta_mode,
                      std::uint64_t seed) {
  return {.n = n, .p = p, .sigma = sigma, .beta_mode = parse_beta_mode(beta_mode), .seed = seed};
}

ExperimentConfig make_config(const std::string& name, const std::string& overrides_json) {
  auto cfg = ExperimentConfig::defaults(parse_experiment_name(name));
  cfg.apply_overrides(nlohmann::json::parse(overrides_json.empty() ? "{}" : overrides_json));
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_ensemble_ols, m) {
  m.doc() = "Subsampled OLS ensembles: closed-form risk and Monte Carlo checks.";

  error_type = PyErr_NewException("ensemble_ols.EnsembleOLSError", PyExc_ValueError, nullptr);
  m.add_object("EnsembleOLSError", py::handle(error_type));
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_steal<py::object>(PyObject_CallFunction(error_type, "s", e.what()));
      exc.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error_type, exc.ptr());
    }
  });

  m.def("optimal_alpha", &optimal_alpha, py::arg("gamma"), py::arg("sigma"));
  m.def("optimal_ridge_risk", &optimal_ridge_risk, py::arg("gamma"), py::arg("sigma"));
  m.def("large_ensemble_risk", &large_ensemble_risk, py::arg("alpha"), py::arg("gamma"), py::arg("sigma"));
  m.def(
      "ensemble_risk",
      [](double alpha, double eta, double gamma, double sigma, std::optional<std::int64_t> k) {
        return ensemble_risk(make_query(alpha, eta, gamma, sigma, k, 1.0));
      },
      py::arg("alpha"), py::arg("eta"), py::arg("gamma"), py::arg("sigma"), py::arg("k") = py::none(),
      "Limiting risk of a k-member ensemble; k=None is the large-ensemble limit.");
  m.def(
      "limiting_bias_variance",
      [](double alpha, double eta, double gamma, double sigma, std::optional<std::int64_t> k) {
        const auto q = make_query(alpha, eta, gamma, sigma, k, 1.0);
        return py::make_tuple(limiting_bias(q), limiting_variance(q));
      },
      py::arg("alpha"), py::arg("eta"), py::arg("gamma"), py::arg("sigma"), py::arg("k") = py::none());
  m.def(
      "mu_scaled_risk",
      [](double alpha, double gamma, double sigma, double mu) {
        return mu_scaled_risk(make_query(alpha, 1.0, gamma, sigma, std::nullopt, mu));
      },
      py::arg("alpha"), py::arg("gamma"), py::arg("sigma"), py::arg("mu"));
  m.def(
      "optimal_mu",
      [](double alpha, double gamma, double sigma) {
        const auto r = optimal_mu(alpha, gamma, sigma);
        return py::make_tuple(r.mu_star, r.risk);
      },
      py::arg("alpha"), py::arg("gamma"), py::arg("sigma"), "Returns (mu_star, risk_at_mu_star).");
  m.def("finite_k_optimal_alpha", &finite_k_optimal_alpha, py::arg("gamma"), py::arg("sigma"), py::arg("eta"),
        py::arg("k"));
  m.def("interpolator_variance_term", &interpolator_variance_term, py::arg("same_member"), py::arg("alpha"),
        py::arg("eta"), py::arg("gamma"), py::arg("sigma"));
  m.def(
      "finite_pair_term",
      [](const std::string& kind, bool same_member, std::int64_t s, std::int64_t t, std::int64_t s_cap,
         std::int64_t sc_cap, std::int64_t n, std::int64_t p, double sigma, double beta_norm_sq) {
        if (kind != "bias" && kind != "variance") {
          throw Error(ErrorCode::ConfigError, "kind must be 'bias' or 'variance'");
        }
        const PairSizes sizes{.s_ii = s, .t_ii = t, .s_cap = s_cap, .sc_cap = sc_cap, .n = n, .p = p};
        return finite_pair_term(kind == "bias" ? RiskComponent::Bias : RiskComponent::Variance, same_member, sizes,
                                sigma, beta_norm_sq);
      },
      py::arg("kind"), py::arg("same_member"), py::arg("s"), py::arg("t"), py::arg("s_cap"), py::arg("sc_cap"),
      py::arg("n"), py::arg("p"), py::arg("sigma") = 1.0, py::arg("beta_norm_sq") = 1.0);

  m.def(
      "generate_problem",
      [](Eigen::Index n, Eigen::Index p, double sigma, const std::string& beta_mode, std::uint64_t seed,
         std::uint64_t trial) {
        const auto inst = generate_problem(make_spec(n, p, sigma, beta_mode, seed), trial);
        py::dict d;
        d["X"] = inst.X;
        d["beta"] = inst.beta;
        d["noise"] = inst.noise;
        d["y"] = inst.y;
        return d;
      },
      py::arg("n"), py::arg("p"), py::arg("sigma") = 1.0, py::arg("beta_mode") = "unit_sphere",
      py::arg("seed") = 42, py::arg("trial") = 0);

  m.def(
      "fit_ensemble",
      [](const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double alpha, double eta, int k, std::uint64_t seed,
         double mu, unsigned threads) {
        if (X.rows() != y.size()) throw Error(ErrorCode::DimensionMismatch, "X and y row counts differ");
        ProblemInstance inst{.X = X, .beta = Eigen::VectorXd::Zero(X.cols()), .noise = {}, .y = y, .sigma = 0.0};
        RandomStream rng(seed);
        auto fit = fit_ensemble(inst, {.alpha = alpha, .eta = eta}, k, rng, threads);
        fit.mu = mu;
        return ensemble_coefficients(fit);
      },
      py::arg("X"), py::arg("y"), py::arg("alpha"), py::arg("eta") = 1.0, py::arg("k") = 1, py::arg("seed") = 42,
      py::arg("mu") = 1.0, py::arg("threads") = 1);
  m.def("fit_ridge", py::overload_cast<const Eigen::MatrixXd&, const Eigen::VectorXd&, double>(&fit_ridge),
        py::arg("X"), py::arg("y"), py::arg("lam"));
  m.def("fit_dropout", py::overload_cast<const Eigen::MatrixXd&, const Eigen::VectorXd&, double>(&fit_dropout),
        py::arg("X"), py::arg("y"), py::arg("alpha"));
  m.def("fit_generalized_dropout",
        py::overload_cast<const Eigen::MatrixXd&, const Eigen::VectorXd&, const Eigen::VectorXd&, bool>(
            &fit_generalized_dropout),
        py::arg("X"), py::arg("y"), py::arg("alpha"), py::arg("corrected") = false);

  m.def(
      "risk_convergence_sim",
      [](Eigen::Index n, Eigen::Index p, double sigma, double alpha, double eta, const std::vector<std::int64_t>& k,
         std::int64_t trials, std::uint64_t seed, unsigned threads) {
        const auto r = risk_convergence_sim(make_spec(n, p, sigma, "unit_sphere", seed), {.alpha = alpha, .eta = eta},
                                            k, trials, threads);
        py::list rows;
        for (const auto& row : r.rows) {
          py::dict d;
          d["k"] = row.k;
          d["mean_risk"] = row.mean_risk;
          d["se"] = row.se;
          d["trials"] = row.trials;
          rows.append(d);
        }
        return py::make_tuple(rows, r.samples);
      },
      py::arg("n"), py::arg("p"), py::arg("sigma"), py::arg("alpha"), py::arg("eta"), py::arg("k"),
      py::arg("trials"), py::arg("seed") = 42, py::arg("threads") = 1,
      "Returns (rows, samples) with samples of shape (trials, len(k)).");
  m.def(
      "estimate_pair_terms",
      [](std::int64_t n, std::int64_t p, std::int64_t s, std::int64_t t, std::int64_t s_cap, std::int64_t sc_cap,
         double sigma, std::int64_t trials, std::uint64_t seed, unsigned threads) {
        const PairSizes sizes{.s_ii = s, .t_ii = t, .s_cap = s_cap, .sc_cap = sc_cap, .n = n, .p = p};
        const auto r = estimate_pair_terms(make_spec(n, p, sigma, "unit_sphere", seed), sizes, trials, threads);
        py::dict d;
        d["bias_same"] = report_dict(r.bias_same);
        d["bias_distinct"] = report_dict(r.bias_distinct);
        d["variance_same"] = report_dict(r.variance_same);
        d["variance_distinct"] = report_dict(r.variance_distinct);
        return d;
      },
      py::arg("n"), py::arg("p"), py::arg("s"), py::arg("t"), py::arg("s_cap"), py::arg("sc_cap"),
      py::arg("sigma") = 1.0, py::arg("trials") = 10'000, py::arg("seed") = 42, py::arg("threads") = 1);

  m.def(
      "_run_experiment",
      [](const std::string& name, const std::string& overrides_json) {
        const auto cfg = make_config(name, overrides_json);
        switch (cfg.name) {
          case ExperimentName::Fig2:
            return figure2_table(run_figure2(cfg), cfg).to_csv();
          case ExperimentName::Fig3:
            return figure3_table(run_figure3(cfg), cfg).to_csv();
          case ExperimentName::Fig4:
            return figure4_table(run_figure4(cfg), cfg).to_csv();
          case ExperimentName::Validate:
            break;
        }
        return run_validation(cfg).table(cfg).to_csv();
      },
      py::arg("name"), py::arg("overrides_json") = "");
  m.def(
      "_run_validation",
      [](const std::string& overrides_json) {
        const auto cfg = make_config("validate", overrides_json);
        return run_validation(cfg).to_json(cfg).dump();
      },
      py::arg("overrides_json") = "");
  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv = {"ensemble-ols"};
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool in process; returns (exit_code, stdout, stderr).");
}
