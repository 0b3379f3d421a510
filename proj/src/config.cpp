#include "deis/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "deis/errors.hpp"
#include "json.hpp"

namespace deis {

using Json = nlohmann::ordered_json;

namespace {

const std::set<std::string> kSamplers{"euler",    "ei_score",  "ddim",       "tab",
                                      "rho_ab",   "rho_mid",   "rho_heun2",  "rho_kutta3",
                                      "rho_rk4",  "ipndm",     "sddim"};
const std::set<std::string> kSchedules{"uniform", "quadratic", "power_t", "power_rho", "log_rho"};

// 1-based line of the first occurrence of "key" in the document, 0 if absent.
int line_of(std::string_view text, const std::string& key) {
  const std::string quoted = "\"" + key + "\"";
  const auto pos = text.find(quoted);
  if (pos == std::string_view::npos) return 0;
  int line = 1;
  for (std::size_t k = 0; k < pos; ++k) line += text[k] == '\n';
  return line;
}

class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  [[noreturn]] void fail(const std::string& path, const std::string& message) const {
    const auto dot = path.find_last_of('.');
    const std::string key = dot == std::string::npos ? path : path.substr(dot + 1);
    const int line = line_of(text_, key);
    std::ostringstream msg;
    msg << "config";
    if (line > 0) msg << " line " << line;
    msg << ": " << path << ": " << message;
    throw ConfigError(msg.str());
  }

  void only_keys(const Json& obj, const std::string& where, std::set<std::string> allowed) const {
    if (!obj.is_object()) fail(where, "expected an object");
    for (const auto& item : obj.items()) {
      if (!allowed.count(item.key())) {
        fail(where.empty() ? item.key() : where + "." + item.key(), "unknown key");
      }
    }
  }

  double number(const Json& v, const std::string& path) const {
    if (!v.is_number()) fail(path, "expected a number");
    return v.get<double>();
  }

  long integer(const Json& v, const std::string& path) const {
    if (!v.is_number_integer()) fail(path, "expected an integer");
    return v.get<long>();
  }

  std::string string(const Json& v, const std::string& path) const {
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const Json& v, const std::string& path) const {
    if (!v.is_array()) fail(path, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) out.push_back(number(e, path));
    return out;
  }

 private:
  std::string_view text_;
};

}  // namespace

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::sample:
      return "sample";
    case ExperimentKind::convergence:
      return "convergence";
    case ExperimentKind::marginal:
      return "marginal";
    case ExperimentKind::trace:
      return "trace";
    case ExperimentKind::loglik:
      return "loglik";
  }
  return "sample";
}

ExperimentKind parse_kind(const std::string& name) {
  for (auto k : {ExperimentKind::sample, ExperimentKind::convergence, ExperimentKind::marginal,
                 ExperimentKind::trace, ExperimentKind::loglik}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown experiment kind '" + name + "'");
}

std::string to_string(ReportFormat format) { return format == ReportFormat::csv ? "csv" : "json"; }

ReportFormat parse_format(const std::string& name) {
  if (name == "csv") return ReportFormat::csv;
  if (name == "json") return ReportFormat::json;
  throw ConfigError("unknown format '" + name + "' (csv or json)");
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& message) {
    throw ConfigError("config: " + field + ": " + message);
  };
  if (diffusion.preset != "vpsde" && diffusion.preset != "vesde") {
    fail("diffusion.preset", "unknown preset '" + diffusion.preset + "'");
  }
  if (!kSamplers.count(sampler.name)) fail("sampler.name", "unknown sampler '" + sampler.name + "'");
  if (!kSchedules.count(schedule.name)) {
    fail("schedule.name", "unknown schedule '" + schedule.name + "'");
  }
  if (sampler.order < 0 || sampler.order > 3) fail("sampler.order", "must be 0..3");
  if (!(sampler.eta >= 0.0 && sampler.eta <= 1.0)) fail("sampler.eta", "must lie in [0, 1]");
  if (!(schedule.t0 > 0.0)) fail("schedule.t0", "must be > 0");
  if (!(schedule.T > schedule.t0)) fail("schedule.T", "must exceed t0");
  if (schedule.N < 1) fail("schedule.N", "must be >= 1");
  if (!(schedule.kappa > 0.0)) fail("schedule.kappa", "must be > 0");
  if (dim < 1) fail("dim", "must be >= 1");
  if (batch < 1) fail("batch", "must be >= 1");
  if (n_traj < 1) fail("n_traj", "must be >= 1");
  if (!(dt > 0.0)) fail("dt", "must be > 0");
  if (!(reference_dt > 0.0 && reference_dt <= kMaxReferenceStep)) {
    fail("reference_dt", "must lie in (0, 1e-3]");
  }
  if (trace_points < 1) fail("trace_points", "must be >= 1");
  if (threads < 0) fail("threads", "must be >= 0");
  if (x_T && static_cast<int>(x_T->size()) != dim) fail("x_T", "length must equal dim");
  std::set<int> seen;
  for (int N : N_list) {
    if (N < 1) fail("N_list", "entries must be >= 1");
    if (!seen.insert(N).second) fail("N_list", "duplicate entry " + std::to_string(N));
  }
  for (double l : lambda_list) {
    if (!(l >= 0.0)) fail("lambda_list", "entries must be >= 0");
  }
  try {
    gmm.validate();
  } catch (const ParameterError& e) {
    fail("gmm", e.what());
  }
  try {
    (void)make_diffusion();
  } catch (const ParameterError& e) {
    fail("diffusion", e.what());
  }
}

DiffusionSpec ExperimentConfig::make_diffusion() const {
  if (diffusion.preset == "vesde") return vesde(diffusion.sigma_min, diffusion.sigma_max, schedule.T);
  return vpsde(VpSchedule{diffusion.beta_min, diffusion.beta_max}, schedule.T);
}

TimeGrid ExperimentConfig::make_grid(int N) const {
  return deis::make_grid(make_diffusion(), schedule.name, schedule.t0, schedule.T, N,
                         schedule.kappa);
}

std::string ExperimentConfig::to_json() const {
  Json j;
  j["kind"] = deis::to_string(kind);
  Json d;
  d["preset"] = diffusion.preset;
  if (diffusion.preset == "vesde") {
    d["sigma_min"] = diffusion.sigma_min;
    d["sigma_max"] = diffusion.sigma_max;
  } else {
    d["beta_min"] = diffusion.beta_min;
    d["beta_max"] = diffusion.beta_max;
  }
  j["diffusion"] = d;
  Json g = Json::array();
  for (std::size_t k = 0; k < gmm.size(); ++k) {
    g.push_back(Json{{"weight", gmm.weights[k]}, {"mean", gmm.means[k]}, {"std", gmm.stds[k]}});
  }
  j["gmm"] = g;
  j["dim"] = dim;
  j["sampler"] = Json{{"name", sampler.name}, {"order", sampler.order}, {"eta", sampler.eta}};
  j["schedule"] = Json{{"name", schedule.name},
                       {"t0", schedule.t0},
                       {"T", schedule.T},
                       {"N", schedule.N},
                       {"kappa", schedule.kappa}};
  j["seed"] = seed;
  j["output"] = output;
  j["format"] = deis::to_string(format);
  j["x_T"] = x_T ? Json(*x_T) : Json(nullptr);
  j["batch"] = batch;
  j["N_list"] = N_list;
  j["lambda_list"] = lambda_list;
  j["n_traj"] = n_traj;
  j["dt"] = dt;
  j["reference_dt"] = reference_dt;
  j["trace_points"] = trace_points;
  j["x0_list"] = x0_list;
  j["threads"] = threads;
  return j.dump();
}

std::string ExperimentConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(to_json())));
  return buf;
}

ExperimentConfig ExperimentConfig::from_json(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    int line = 1, column = 1;
    for (std::size_t k = 0; k + 1 < e.byte && k < text.size(); ++k) {
      if (text[k] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    std::ostringstream msg;
    msg << "config line " << line << ", column " << column << ": syntax error";
    throw ConfigError(msg.str());
  }

  const Reader rd(text);
  rd.only_keys(j, "", {"kind", "diffusion", "gmm", "dim", "sampler", "schedule", "seed", "output",
                       "format", "x_T", "batch", "N_list", "lambda_list", "n_traj", "dt",
                       "reference_dt", "trace_points", "x0_list", "threads"});

  ExperimentConfig c;
  try {
    if (j.contains("kind")) c.kind = parse_kind(rd.string(j["kind"], "kind"));
    if (j.contains("format")) c.format = parse_format(rd.string(j["format"], "format"));
  } catch (const ConfigError& e) {
    rd.fail(j.contains("kind") ? "kind" : "format", e.what());
  }

  if (j.contains("diffusion")) {
    const Json& d = j["diffusion"];
    rd.only_keys(d, "diffusion", {"preset", "beta_min", "beta_max", "sigma_min", "sigma_max"});
    if (d.contains("preset")) c.diffusion.preset = rd.string(d["preset"], "diffusion.preset");
    if (d.contains("beta_min")) c.diffusion.beta_min = rd.number(d["beta_min"], "diffusion.beta_min");
    if (d.contains("beta_max")) c.diffusion.beta_max = rd.number(d["beta_max"], "diffusion.beta_max");
    if (d.contains("sigma_min")) {
      c.diffusion.sigma_min = rd.number(d["sigma_min"], "diffusion.sigma_min");
    }
    if (d.contains("sigma_max")) {
      c.diffusion.sigma_max = rd.number(d["sigma_max"], "diffusion.sigma_max");
    }
  }

  if (j.contains("gmm")) {
    const Json& g = j["gmm"];
    if (!g.is_array() || g.empty()) rd.fail("gmm", "expected a non-empty array of components");
    c.gmm = {};
    for (const Json& comp : g) {
      rd.only_keys(comp, "gmm", {"weight", "mean", "std"});
      if (!comp.contains("weight") || !comp.contains("mean") || !comp.contains("std")) {
        rd.fail("gmm", "each component needs weight, mean and std");
      }
      c.gmm.weights.push_back(rd.number(comp["weight"], "gmm.weight"));
      c.gmm.means.push_back(rd.number(comp["mean"], "gmm.mean"));
      c.gmm.stds.push_back(rd.number(comp["std"], "gmm.std"));
    }
  }

  if (j.contains("sampler")) {
    const Json& s = j["sampler"];
    rd.only_keys(s, "sampler", {"name", "order", "eta"});
    if (s.contains("name")) c.sampler.name = rd.string(s["name"], "sampler.name");
    if (s.contains("order")) c.sampler.order = static_cast<int>(rd.integer(s["order"], "sampler.order"));
    if (s.contains("eta")) c.sampler.eta = rd.number(s["eta"], "sampler.eta");
  }

  if (j.contains("schedule")) {
    const Json& s = j["schedule"];
    rd.only_keys(s, "schedule", {"name", "t0", "T", "N", "kappa"});
    if (s.contains("name")) c.schedule.name = rd.string(s["name"], "schedule.name");
    if (s.contains("t0")) c.schedule.t0 = rd.number(s["t0"], "schedule.t0");
    if (s.contains("T")) c.schedule.T = rd.number(s["T"], "schedule.T");
    if (s.contains("N")) c.schedule.N = static_cast<int>(rd.integer(s["N"], "schedule.N"));
    if (s.contains("kappa")) c.schedule.kappa = rd.number(s["kappa"], "schedule.kappa");
  }

  if (j.contains("dim")) c.dim = static_cast<int>(rd.integer(j["dim"], "dim"));
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) rd.fail("seed", "expected a non-negative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("output")) c.output = rd.string(j["output"], "output");
  if (j.contains("x_T") && !j["x_T"].is_null()) c.x_T = rd.numbers(j["x_T"], "x_T");
  if (j.contains("batch")) c.batch = static_cast<int>(rd.integer(j["batch"], "batch"));
  if (j.contains("N_list")) {
    if (!j["N_list"].is_array()) rd.fail("N_list", "expected an array of integers");
    for (const Json& n : j["N_list"]) c.N_list.push_back(static_cast<int>(rd.integer(n, "N_list")));
  }
  if (j.contains("lambda_list")) c.lambda_list = rd.numbers(j["lambda_list"], "lambda_list");
  if (j.contains("n_traj")) c.n_traj = rd.integer(j["n_traj"], "n_traj");
  if (j.contains("dt")) c.dt = rd.number(j["dt"], "dt");
  if (j.contains("reference_dt")) c.reference_dt = rd.number(j["reference_dt"], "reference_dt");
  if (j.contains("trace_points")) {
    c.trace_points = static_cast<int>(rd.integer(j["trace_points"], "trace_points"));
  }
  if (j.contains("x0_list")) c.x0_list = rd.numbers(j["x0_list"], "x0_list");
  if (j.contains("threads")) c.threads = static_cast<int>(rd.integer(j["threads"], "threads"));

  try {
    c.validate();
  } catch (const ConfigError& e) {
    // Re-attach a line number using the field name in the message.
    const std::string what = e.what();
    const std::string prefix = "config: ";
    const auto colon = what.find(':', prefix.size());
    if (what.rfind(prefix, 0) == 0 && colon != std::string::npos) {
      rd.fail(what.substr(prefix.size(), colon - prefix.size()), what.substr(colon + 2));
    }
    throw;
  }
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

}  // namespace deis
