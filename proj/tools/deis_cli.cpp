// Command-line front end. Precedence: command-line flags > config file > defaults.

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "deis/config.hpp"
#include "deis/errors.hpp"
#include "deis/harness.hpp"

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> format;
  std::optional<std::string> sampler;
  std::optional<int> order;
  std::optional<std::string> schedule;
  std::optional<int> steps;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "JSON experiment config");
  cmd->add_option("--seed", o.seed, "master seed (u64)");
  cmd->add_option("--out", o.out, "output path; stdout when omitted");
  cmd->add_option("--format", o.format, "report format")->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--sampler", o.sampler, "sampler name");
  cmd->add_option("--order", o.order, "sampler order (0..3)");
  cmd->add_option("--schedule", o.schedule, "time schedule name");
  cmd->add_option("--steps,-N", o.steps, "number of steps N");
  cmd->add_option("--threads", o.threads, "worker threads (0: all cores)");
}

deis::ExperimentConfig resolve(const Overrides& o, deis::ExperimentKind kind) {
  deis::ExperimentConfig c;
  if (!o.config_path.empty()) c = deis::ExperimentConfig::from_file(o.config_path);
  c.kind = kind;
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.output = *o.out;
  if (o.format) c.format = deis::parse_format(*o.format);
  if (o.sampler) c.sampler.name = *o.sampler;
  if (o.order) c.sampler.order = *o.order;
  if (o.schedule) c.schedule.name = *o.schedule;
  if (o.steps) c.schedule.N = *o.steps;
  if (o.threads) c.threads = *o.threads;
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exponential-integrator diffusion samplers against analytic Gaussian-mixture oracles"};
  app.require_subcommand(1);

  Overrides o;
  std::optional<deis::ExperimentKind> kind;
  bool weights = false;

  const std::pair<const char*, deis::ExperimentKind> experiments[] = {
      {"sample", deis::ExperimentKind::sample},
      {"convergence", deis::ExperimentKind::convergence},
      {"marginal", deis::ExperimentKind::marginal},
      {"trace", deis::ExperimentKind::trace},
      {"loglik", deis::ExperimentKind::loglik},
  };
  const char* help[] = {
      "run one sampler and write its trajectory",
      "terminal error against the reference for each N in N_list",
      "Euler-Maruyama terminal moments for each lambda",
      "frozen-score and extrapolation errors along a reference trajectory",
      "probability flow log-likelihood against the analytic density",
  };
  for (std::size_t k = 0; k < std::size(experiments); ++k) {
    CLI::App* cmd = app.add_subcommand(experiments[k].first, help[k]);
    add_common(cmd, o);
    const auto value = experiments[k].second;
    cmd->callback([&kind, value] { kind = value; });
  }
  CLI::App* weights_cmd = app.add_subcommand("weights", "weight-table utilities");
  weights_cmd->require_subcommand(1);
  CLI::App* cache_cmd = weights_cmd->add_subcommand("cache", "build and store a tab weight table");
  add_common(cache_cmd, o);
  cache_cmd->callback([&weights] { weights = true; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (weights) {
      const deis::ExperimentConfig c = resolve(o, deis::ExperimentKind::sample);
      deis::write_output(c.output, deis::build_weight_cache(c).to_json() + "\n");
      return 0;
    }
    const deis::ExperimentConfig c = resolve(o, *kind);
    const deis::MetricReport report = deis::run_experiment(c);
    deis::write_output(c.output, report.render(c.format));
    if (report.status != "ok") {
      std::cerr << "deis: report flagged as " << report.status << "\n";
      for (const auto& w : report.warnings) std::cerr << "  " << w << "\n";
      return 3;
    }
    return 0;
  } catch (const deis::ConfigError& e) {
    std::cerr << "deis: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "deis: invalid configuration: " << e.what() << "\n";
    return 2;
  } catch (const std::logic_error& e) {
    std::cerr << "deis: invalid configuration: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "deis: numerical failure: " << e.what() << "\n";
    return 3;
  }
}
