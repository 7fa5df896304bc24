#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ensemble_ols {

enum class ExperimentName { Fig2, Fig3, Fig4, Validate };

std::string_view to_string(ExperimentName name) noexcept;
/// Accepts "fig2" / "Fig2" / "2" style spellings and "validate"; ConfigError otherwise.
ExperimentName parse_experiment_name(std::string_view text);

/// Settings of one pipeline. `defaults` fills the per-experiment values;
/// `apply_overrides` layers a JSON object on top and rejects unknown keys.
struct ExperimentConfig {
  ExperimentName name = ExperimentName::Fig2;
  std::int64_t n = 200;
  std::int64_t p = 400;  // fig3
  std::int64_t trials = 50;
  std::int64_t identity_trials = 100'000;  // validate
  std::vector<std::int64_t> k_grid;
  std::vector<double> gamma_list;  // fig2
  std::vector<double> sigma_grid;  // fig3, fig4
  double sigma = 1.0;              // fig2
  double gamma = 0.5;              // fig4
  std::uint64_t seed = 42;
  std::string output_dir = ".";
  unsigned threads = 1;

  static ExperimentConfig defaults(ExperimentName name);
  /// Keys: n, p, trials, identity_trials, k_grid, gamma_list, sigma_grid,
  /// sigma, gamma, seed, output_dir, threads. A "name" key must agree with
  /// `name`. Calls validate().
  void apply_overrides(const nlohmann::json& overrides);
  void validate() const;  // ConfigError

  /// Canonical form of the settings that affect results (no output_dir,
  /// no threads).
  nlohmann::json canonical_json() const;
  /// 64-bit FNV-1a of canonical_json().dump(), as 16 hex digits.
  std::string hash() const;
};

/// `count` points spaced evenly in log10 between lo and hi inclusive.
std::vector<double> log_grid(double lo, double hi, std::size_t count);

/// "%.6g" under the C locale.
std::string format_number(double value);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_csv() const;
};

struct Figure2Row {
  double gamma = 0.0;
  std::string eta_mode;  // "full" (eta = 1) or "tight" (eta = 1.1 alpha gamma)
  double alpha = 0.0;
  double eta = 0.0;
  std::int64_t k = 0;
  double mean_risk = 0.0;
  double se = 0.0;
  double ridge_target = 0.0;
  bool skipped = false;
};

struct Figure3Row {
  double sigma = 0.0;
  std::string alpha_mode;  // "alpha_star" or "finite_k"
  double alpha = 0.0;
  std::int64_t k = 0;
  double mean_risk = 0.0;
  double se = 0.0;
  double ridge_target = 0.0;
  bool skipped = false;
};

struct Figure4Row {
  double sigma = 0.0;
  std::string alpha_mode;  // "half_alpha_star" or "half"
  std::string mu_mode;     // "one" or "mu_star"
  double alpha = 0.0;
  double mu = 0.0;
  double risk = 0.0;
};

std::vector<Figure2Row> run_figure2(const ExperimentConfig& cfg);
std::vector<Figure3Row> run_figure3(const ExperimentConfig& cfg);
std::vector<Figure4Row> run_figure4(const ExperimentConfig& cfg);

Table figure2_table(const std::vector<Figure2Row>& rows, const ExperimentConfig& cfg);
Table figure3_table(const std::vector<Figure3Row>& rows, const ExperimentConfig& cfg);
Table figure4_table(const std::vector<Figure4Row>& rows, const ExperimentConfig& cfg);

struct ValidationCheck {
  std::string group;
  std::string name;
  double value = 0.0;      // |z| or absolute error
  double threshold = 0.0;  // pass iff value <= threshold
  bool passed = false;
  nlohmann::json detail;
};

struct ValidationSummary {
  std::vector<ValidationCheck> checks;

  bool passed() const noexcept;
  Table table(const ExperimentConfig& cfg) const;
  nlohmann::json to_json(const ExperimentConfig& cfg) const;
};

inline constexpr double kZLimit = 4.0;
inline constexpr double kIdentityTolerance = 1e-12;
inline constexpr double kDropoutTolerance = 1e-6;

/// Pair terms over a size grid, the subselection / Wishart identities, finite-to-limit
/// consistency, closed-form identities on a log grid and dropout against
/// its descent oracle. Failures are recorded, not thrown.
ValidationSummary run_validation(const ExperimentConfig& cfg);

/// Writes `file_name` (CSV) plus manifest.json into cfg.output_dir.
/// `extra_files` are listed in the manifest but written by the caller.
void write_experiment_outputs(const ExperimentConfig& cfg, const std::string& file_name, const Table& table,
                              const std::vector<std::string>& extra_files = {});

}  // namespace ensemble_ols
