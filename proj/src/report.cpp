#include "deis/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "deis/errors.hpp"
#include "json.hpp"

namespace deis {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void MetricReport::stamp(const ExperimentConfig& config) {
  config_json = config.to_json();
  config_hash = config.hash();
  seed = config.seed;
}

void MetricReport::sort_rows() {
  const std::size_t keys = std::min(key_columns, columns.size());
  std::stable_sort(rows.begin(), rows.end(), [keys](const auto& a, const auto& b) {
    for (std::size_t k = 0; k < keys; ++k) {
      if (a[k] < b[k]) return true;
      if (b[k] < a[k]) return false;
    }
    return false;
  });
}

std::size_t MetricReport::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw std::out_of_range("report has no column '" + name + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

double MetricReport::at(std::size_t row, const std::string& name) const {
  return rows.at(row).at(column(name));
}

double MetricReport::summary_value(const std::string& name) const {
  for (const auto& [k, v] : summary) {
    if (k == name) return v;
  }
  throw std::out_of_range("report has no summary field '" + name + "'");
}

bool MetricReport::has_summary(const std::string& name) const {
  return std::any_of(summary.begin(), summary.end(), [&](const auto& kv) { return kv.first == name; });
}

std::string MetricReport::to_csv() const {
  std::ostringstream out;
  out << "# schema=" << kReportSchema << " kind=" << kind << "\n";
  out << "# config=" << config_json << "\n";
  out << "# config_hash=" << config_hash << " seed=" << seed << " version=" << kVersion
      << " status=" << status << "\n";
  for (const auto& [k, v] : summary) out << "# summary " << k << "=" << format_double(v) << "\n";
  for (const auto& w : warnings) out << "# warning " << w << "\n";
  for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << format_double(row[c]);
    out << "\n";
  }
  return out.str();
}

std::string MetricReport::to_json() const {
  using Json = nlohmann::ordered_json;
  auto number = [](double v) -> Json {
    if (std::isfinite(v)) return v;
    return format_double(v);
  };
  Json j;
  j["schema"] = kReportSchema;
  j["kind"] = kind;
  j["provenance"] = Json{{"config", Json::parse(config_json.empty() ? "{}" : config_json)},
                         {"config_hash", config_hash},
                         {"seed", seed},
                         {"version", kVersion}};
  j["status"] = status;
  Json s = Json::object();
  for (const auto& [k, v] : summary) s[k] = number(v);
  j["summary"] = s;
  j["warnings"] = warnings;
  j["columns"] = columns;
  Json rs = Json::array();
  for (const auto& row : rows) {
    Json r = Json::array();
    for (double v : row) r.push_back(number(v));
    rs.push_back(r);
  }
  j["rows"] = rs;
  return j.dump(2) + "\n";
}

std::string MetricReport::render(ReportFormat format) const {
  return format == ReportFormat::csv ? to_csv() : to_json();
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write output file '" + path + "'");
  out << text;
  if (!out) throw NumericalError("write failed for '" + path + "'");
}

}  // namespace deis
