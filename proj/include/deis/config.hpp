#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "deis/diffusion.hpp"
#include "deis/oracle.hpp"
#include "deis/timegrid.hpp"

namespace deis {

enum class ExperimentKind { sample, convergence, marginal, trace, loglik };

std::string to_string(ExperimentKind kind);
ExperimentKind parse_kind(const std::string& name);

enum class ReportFormat { csv, json };

std::string to_string(ReportFormat format);
ReportFormat parse_format(const std::string& name);

struct DiffusionConfig {
  std::string preset = "vpsde";
  double beta_min = 0.1;
  double beta_max = 20.0;
  double sigma_min = 0.01;
  double sigma_max = 50.0;
};

struct SamplerConfig {
  std::string name = "tab";
  int order = 0;
  double eta = 0.0;  // sddim only
};

struct ScheduleConfig {
  std::string name = "quadratic";
  double t0 = 1e-3;
  double T = 1.0;
  int N = 10;
  double kappa = 2.0;  // power_t / power_rho only
};

/// Fully resolved experiment description. Parsed from a single JSON
/// document; keys left out take the defaults below, unknown keys are errors.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::sample;
  DiffusionConfig diffusion;
  GaussianMixture gmm = GaussianMixture::single(0.0, 1.0);
  int dim = 1;
  SamplerConfig sampler;
  ScheduleConfig schedule;
  std::uint64_t seed = 0;
  std::string output;  // empty: stdout
  ReportFormat format = ReportFormat::csv;

  std::optional<State> x_T;      // sample: initial state; otherwise drawn from pi
  int batch = 64;                // convergence / trace: x_T draws per cell
  std::vector<int> N_list;       // convergence
  std::vector<double> lambda_list{0.0, 1.0};  // marginal
  long n_traj = 50000;           // marginal
  double dt = 1e-3;              // marginal (EM step), loglik (RK4 step)
  double reference_dt = 1e-3;    // convergence / trace ground truth
  int trace_points = 16;         // trace: samples per grid interval
  std::vector<double> x0_list;   // loglik
  int threads = 0;               // 0: hardware concurrency

  /// Throws ConfigError naming the offending field.
  void validate() const;

  [[nodiscard]] DiffusionSpec make_diffusion() const;
  [[nodiscard]] TimeGrid make_grid(int N) const;

  /// Canonical JSON with every field present.
  [[nodiscard]] std::string to_json() const;
  /// 16 hex digits of FNV-1a over to_json().
  [[nodiscard]] std::string hash() const;

  /// Throws ConfigError with line:column for syntax errors and the line of
  /// the offending key for validation errors.
  static ExperimentConfig from_json(std::string_view text);
  static ExperimentConfig from_file(const std::string& path);
};

std::uint64_t fnv1a(std::string_view bytes);

}  // namespace deis
