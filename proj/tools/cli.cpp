#include "cli.hpp"

#include "ensemble_ols/error.hpp"
#include "ensemble_ols/experiments.hpp"
#include "ensemble_ols/montecarlo.hpp"
#include "ensemble_ols/risk_theory.hpp"
#include "ensemble_ols/sampling.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace ensemble_ols::cli {

namespace {

using json = nlohmann::json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Value = std::variant<double, std::int64_t, std::string>;
using Record = std::vector<std::pair<std::string, Value>>;

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void print_record(std::ostream& out, const Record& rec, const std::string& format) {
  if (format == "json") {
    json obj = json::object();
    for (const auto& [k, v] : rec) std::visit([&, &key = k](const auto& x) { obj[key] = x; }, v);
    out << obj.dump(2) << "\n";
    return;
  }
  auto text = [&](const Value& v, bool kv) {
    if (const auto* d = std::get_if<double>(&v)) return kv ? fixed6(*d) : format_number(*d);
    if (const auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
    return std::get<std::string>(v);
  };
  if (format == "csv") {
    for (std::size_t i = 0; i < rec.size(); ++i) out << (i ? "," : "") << rec[i].first;
    out << "\n";
    for (std::size_t i = 0; i < rec.size(); ++i) out << (i ? "," : "") << text(rec[i].second, false);
    out << "\n";
    return;
  }
  for (const auto& [k, v] : rec) out << k << "=" << text(v, true) << "\n";
}

bool is_text_column(const std::string& name) {
  return name == "config_hash" || name == "status" || name == "group" || name == "check" ||
         name.ends_with("_mode");
}

json table_json(const Table& t) {
  json rows = json::array();
  for (const auto& r : t.rows) {
    json obj = json::object();
    for (std::size_t i = 0; i < t.header.size(); ++i) {
      const auto& c = r[i];
      double d = 0.0;
      if (c.empty()) {
        obj[t.header[i]] = nullptr;
      } else if (!is_text_column(t.header[i]) &&
                 std::from_chars(c.data(), c.data() + c.size(), d).ptr == c.data() + c.size()) {
        obj[t.header[i]] = d;
      } else {
        obj[t.header[i]] = c;
      }
    }
    rows.push_back(std::move(obj));
  }
  return rows;
}

void print_table(std::ostream& out, const Table& t, const std::string& format) {
  if (format == "csv") {
    out << t.to_csv();
  } else if (format == "json") {
    out << table_json(t).dump(2) << "\n";
  } else {
    for (const auto& r : t.rows) {
      for (std::size_t i = 0; i < t.header.size(); ++i) out << (i ? " " : "") << t.header[i] << "=" << r[i];
      out << "\n";
    }
  }
}

/// --threads, else ENSEMBLE_OLS_THREADS, else nothing.
std::optional<unsigned> resolve_thread_flag(const CLI::Option* opt, unsigned flag_value) {
  if (opt->count() > 0) return flag_value;
  const char* env = std::getenv("ENSEMBLE_OLS_THREADS");
  if (env == nullptr || *env == '\0') return std::nullopt;
  unsigned value = 0;
  const std::string_view s(env);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw UsageError("ENSEMBLE_OLS_THREADS must be a non-negative integer, got '" + std::string(s) + "'");
  }
  return value;
}

json load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw UsageError("cannot open config file '" + path + "'");
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw UsageError("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

// ---------------------------------------------------------------------------

struct TheoryArgs {
  std::optional<double> alpha;
  double eta = 1.0;
  double gamma = 0.5;
  double sigma = 1.0;
  std::string k = "inf";
  std::string mu = "1";
  std::string format = "kv";
};

Record run_theory(const TheoryArgs& a) {
  TheoryQuery q;
  q.eta = a.eta;
  q.gamma = a.gamma;
  q.sigma = a.sigma;
  const double alpha_star = optimal_alpha(a.gamma, a.sigma);
  q.alpha = a.alpha.value_or(alpha_star);

  Value k_value = std::string("inf");
  if (a.k != "inf") {
    std::int64_t k = 0;
    const auto res = std::from_chars(a.k.data(), a.k.data() + a.k.size(), k);
    if (res.ec != std::errc{} || res.ptr != a.k.data() + a.k.size() || k < 1) {
      throw UsageError("--k must be a positive integer or 'inf', got '" + a.k + "'");
    }
    q.k = k;
    k_value = k;
  }
  const bool infinite = std::holds_alternative<InfiniteEnsemble>(q.k);

  std::optional<OptimalScale> best;
  try {
    best = optimal_mu(q.alpha, q.gamma, q.sigma);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegenerateDenominator) throw;
  }

  double risk = ensemble_risk(q);
  if (a.mu == "opt") {
    if (!infinite) throw UsageError("--mu requires --k inf");
    if (!best) throw Error(ErrorCode::DegenerateDenominator, "mu_star is undefined at these parameters");
    q.mu = best->mu_star;
    risk = best->risk;
  } else {
    std::size_t used = 0;
    try {
      q.mu = std::stod(a.mu, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != a.mu.size() || a.mu.empty()) throw UsageError("--mu must be a number or 'opt', got '" + a.mu + "'");
    if (q.mu != 1.0) {
      if (!infinite) throw UsageError("--mu requires --k inf");
      risk = mu_scaled_risk(q);
    }
  }

  Record rec = {{"alpha_star", alpha_star}, {"alpha", q.alpha}, {"eta", q.eta},
                {"gamma", q.gamma},         {"sigma", q.sigma}, {"k", k_value},
                {"mu", q.mu}};
  if (best) rec.emplace_back("mu_star", best->mu_star);
  rec.emplace_back("large_ensemble_risk", large_ensemble_risk(q.alpha, q.gamma, q.sigma));
  rec.emplace_back("risk", risk);
  rec.emplace_back("ridge", optimal_ridge_risk(q.gamma, q.sigma));
  return rec;
}

struct SimulateArgs {
  std::int64_t n = 200;
  std::int64_t p = 100;
  double sigma = 1.0;
  std::optional<double> alpha;
  double eta = 1.0;
  std::vector<std::int64_t> k = {1, 2, 4, 8, 16, 32, 64, 128, 256};
  std::int64_t trials = 50;
  std::uint64_t seed = 42;
  unsigned threads = 1;
  std::string format = "kv";
  std::string output;
};

Table run_simulate(const SimulateArgs& a, unsigned threads) {
  ProblemSpec spec;
  spec.n = a.n;
  spec.p = a.p;
  spec.sigma = a.sigma;
  spec.seed = a.seed;
  spec.validate();
  const double gamma = spec.gamma();
  SubsampleScheme scheme;
  scheme.alpha = a.alpha.value_or(optimal_alpha(gamma, a.sigma));
  scheme.eta = a.eta;
  if (a.trials < 1) throw Error(ErrorCode::ConfigError, "trials must be positive");
  const auto sim = risk_convergence_sim(spec, scheme, a.k, a.trials, threads);

  Table t;
  t.header = {"k", "mean_risk", "se", "trials", "theory_risk", "alpha", "eta", "seed"};
  for (const auto& row : sim.rows) {
    std::string theory;
    try {
      theory = format_number(ensemble_risk({.alpha = scheme.alpha, .eta = scheme.eta, .gamma = gamma,
                                            .sigma = a.sigma, .k = row.k}));
    } catch (const Error&) {
    }
    t.rows.push_back({std::to_string(row.k), format_number(row.mean_risk), format_number(row.se),
                      std::to_string(row.trials), theory, format_number(scheme.alpha), format_number(scheme.eta),
                      std::to_string(a.seed)});
  }
  return t;
}

struct ExperimentArgs {
  std::string which;
  std::string config;
  std::int64_t n = 0;
  std::int64_t p = 0;
  std::int64_t trials = 0;
  std::int64_t identity_trials = 0;
  std::vector<std::int64_t> k;
  std::vector<double> gamma;
  std::vector<double> sigma;
  std::uint64_t seed = 42;
  unsigned threads = 1;
  std::string output_dir;
  std::string format = "kv";
};

struct ExperimentOptions {
  CLI::Option* config = nullptr;
  CLI::Option* n = nullptr;
  CLI::Option* p = nullptr;
  CLI::Option* trials = nullptr;
  CLI::Option* identity_trials = nullptr;
  CLI::Option* k = nullptr;
  CLI::Option* gamma = nullptr;
  CLI::Option* sigma = nullptr;
  CLI::Option* seed = nullptr;
  CLI::Option* threads = nullptr;
  CLI::Option* output_dir = nullptr;
};

bool given(const CLI::Option* opt) { return opt != nullptr && opt->count() > 0; }

ExperimentConfig build_config(ExperimentName name, const ExperimentArgs& a, const ExperimentOptions& o,
                              std::optional<unsigned> threads) {
  auto cfg = ExperimentConfig::defaults(name);
  if (given(o.config)) cfg.apply_overrides(load_config_file(a.config));

  json flags = json::object();
  if (given(o.n)) flags["n"] = a.n;
  if (given(o.p)) flags["p"] = a.p;
  if (given(o.trials)) flags["trials"] = a.trials;
  if (given(o.identity_trials)) flags["identity_trials"] = a.identity_trials;
  if (given(o.k)) flags["k_grid"] = a.k;
  if (given(o.seed)) flags["seed"] = a.seed;
  if (given(o.output_dir)) flags["output_dir"] = a.output_dir;
  if (given(o.gamma)) {
    if (name == ExperimentName::Fig2) {
      flags["gamma_list"] = a.gamma;
    } else if (name == ExperimentName::Fig4 && a.gamma.size() == 1) {
      flags["gamma"] = a.gamma.front();
    } else {
      throw UsageError(name == ExperimentName::Fig4 ? "figure 4 takes a single --gamma"
                                                    : "--gamma is fixed by --n and --p for figure 3");
    }
  }
  if (given(o.sigma)) {
    if (name == ExperimentName::Fig2) {
      if (a.sigma.size() != 1) throw UsageError("figure 2 takes a single --sigma");
      flags["sigma"] = a.sigma.front();
    } else {
      flags["sigma_grid"] = a.sigma;
    }
  }
  cfg.apply_overrides(flags);
  if (threads) cfg.threads = *threads;
  return cfg;
}

ExperimentOptions add_experiment_options(CLI::App* sub, ExperimentArgs& a, bool figure) {
  ExperimentOptions o;
  o.config = sub->add_option("--config", a.config, "JSON config; flags override file values");
  if (figure) {
    o.n = sub->add_option("--n", a.n, "number of examples");
    o.p = sub->add_option("--p", a.p, "number of features (figure 3)");
    o.k = sub->add_option("--k", a.k, "ensemble sizes, comma separated")->delimiter(',');
    o.gamma = sub->add_option("--gamma", a.gamma, "aspect ratios (figure 2 list, figure 4 single)")->delimiter(',');
    o.sigma = sub->add_option("--sigma", a.sigma, "noise level (figure 2 single, figures 3/4 list)")->delimiter(',');
  } else {
    o.identity_trials = sub->add_option("--identity-trials", a.identity_trials, "trials per matrix identity");
  }
  o.trials = sub->add_option("--trials", a.trials, "Monte Carlo trials");
  o.seed = sub->add_option("--seed", a.seed, "base seed");
  o.threads = sub->add_option("--threads", a.threads, "worker threads, 0 = all cores");
  o.output_dir = sub->add_option("--output-dir", a.output_dir, "directory for CSV and manifest.json");
  sub->add_option("--format", a.format, "stdout format")->check(CLI::IsMember({"kv", "csv", "json"}));
  return o;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Subsampled least-squares ensembles: closed-form risk, simulation and validation", "ensemble-ols"};
  app.require_subcommand(1, 1);

  TheoryArgs theory_args;
  auto* theory = app.add_subcommand("theory", "print closed-form risk values");
  theory->add_option("--alpha", theory_args.alpha, "feature rate (default alpha_star)");
  theory->add_option("--eta", theory_args.eta, "example rate")->capture_default_str();
  theory->add_option("--gamma", theory_args.gamma, "aspect ratio p/n")->capture_default_str();
  theory->add_option("--sigma", theory_args.sigma, "noise level")->capture_default_str();
  theory->add_option("--k", theory_args.k, "ensemble size or 'inf'")->capture_default_str();
  theory->add_option("--mu", theory_args.mu, "output scale or 'opt'")->capture_default_str();
  theory->add_option("--format", theory_args.format, "stdout format")
      ->check(CLI::IsMember({"kv", "csv", "json"}))
      ->capture_default_str();

  SimulateArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo ensemble risk versus k");
  simulate->add_option("--n", sim_args.n, "number of examples")->capture_default_str();
  simulate->add_option("--p", sim_args.p, "number of features")->capture_default_str();
  simulate->add_option("--sigma", sim_args.sigma, "noise level")->capture_default_str();
  simulate->add_option("--alpha", sim_args.alpha, "feature rate (default alpha_star)");
  simulate->add_option("--eta", sim_args.eta, "example rate")->capture_default_str();
  simulate->add_option("--k", sim_args.k, "ensemble sizes, comma separated")->delimiter(',')->capture_default_str();
  simulate->add_option("--trials", sim_args.trials, "Monte Carlo trials")->capture_default_str();
  simulate->add_option("--seed", sim_args.seed, "base seed")->capture_default_str();
  auto* sim_threads = simulate->add_option("--threads", sim_args.threads, "worker threads, 0 = all cores");
  simulate->add_option("--format", sim_args.format, "stdout format")
      ->check(CLI::IsMember({"kv", "csv", "json"}))
      ->capture_default_str();
  simulate->add_option("--output", sim_args.output, "write to this file instead of stdout");

  ExperimentArgs fig_args;
  auto* figure = app.add_subcommand("figure", "run a figure pipeline (2, 3 or 4)");
  figure->add_option("which", fig_args.which, "figure number")->required()->check(CLI::IsMember({"2", "3", "4"}));
  const auto fig_opts = add_experiment_options(figure, fig_args, true);

  ExperimentArgs val_args;
  auto* validate = app.add_subcommand("validate", "run the validation suite");
  const auto val_opts = add_experiment_options(validate, val_args, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs.front()->help());
    return 0;
  } catch (const CLI::ParseError& e) {
    const auto subs = app.get_subcommands();
    err << "error: " << e.what() << "\n" << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }

  CLI::App* active = app.get_subcommands().front();
  try {
    if (active == theory) {
      print_record(out, run_theory(theory_args), theory_args.format);
      return 0;
    }
    if (active == simulate) {
      const auto table = run_simulate(sim_args, resolve_thread_flag(sim_threads, sim_args.threads).value_or(1));
      if (sim_args.output.empty()) {
        print_table(out, table, sim_args.format);
      } else {
        std::ofstream f(sim_args.output, std::ios::binary);
        if (!f) throw UsageError("cannot write '" + sim_args.output + "'");
        print_table(f, table, sim_args.format);
      }
      return 0;
    }
    if (active == figure) {
      const auto name = parse_experiment_name(fig_args.which);
      const auto cfg = build_config(name, fig_args, fig_opts, resolve_thread_flag(fig_opts.threads, fig_args.threads));
      Table table;
      std::string file;
      switch (name) {
        case ExperimentName::Fig2:
          table = figure2_table(run_figure2(cfg), cfg);
          file = "figure2.csv";
          break;
        case ExperimentName::Fig3:
          table = figure3_table(run_figure3(cfg), cfg);
          file = "figure3.csv";
          break;
        default:
          table = figure4_table(run_figure4(cfg), cfg);
          file = "figure4.csv";
          break;
      }
      write_experiment_outputs(cfg, file, table);
      print_table(out, table, fig_args.format);
      return 0;
    }
    const auto cfg = build_config(ExperimentName::Validate, val_args, val_opts,
                                  resolve_thread_flag(val_opts.threads, val_args.threads));
    const auto summary = run_validation(cfg);
    const auto table = summary.table(cfg);
    write_experiment_outputs(cfg, "validation.csv", table, {"validation.json"});
    {
      std::ofstream f(std::filesystem::path(cfg.output_dir) / "validation.json", std::ios::binary);
      if (!f) throw UsageError("cannot write validation.json");
      f << summary.to_json(cfg).dump(2) << "\n";
    }
    if (val_args.format == "json") {
      out << summary.to_json(cfg).dump(2) << "\n";
    } else {
      print_table(out, table, val_args.format);
      if (val_args.format == "kv") out << "overall=" << (summary.passed() ? "pass" : "fail") << "\n";
    }
    return summary.passed() ? 0 : 1;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n" << active->help();
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    if (e.code() == ErrorCode::ConfigError) err << active->help();
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace ensemble_ols::cli
