#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "deis/config.hpp"

namespace deis {

inline constexpr const char* kReportSchema = "deis-report/1";
inline constexpr const char* kVersion = "0.1.0";

/// Tabular experiment output plus provenance. Rows are sorted by the leading
/// key_columns before they are written so that assembly order does not matter.
struct MetricReport {
  std::string kind;
  std::vector<std::string> columns;
  std::size_t key_columns = 1;
  std::vector<std::vector<double>> rows;
  std::vector<std::pair<std::string, double>> summary;
  std::string status = "ok";
  std::vector<std::string> warnings;

  std::string config_json;
  std::string config_hash;
  std::uint64_t seed = 0;

  void stamp(const ExperimentConfig& config);
  void sort_rows();

  /// Index of a named column; throws std::out_of_range.
  [[nodiscard]] std::size_t column(const std::string& name) const;
  [[nodiscard]] double at(std::size_t row, const std::string& name) const;
  /// Named summary value; throws std::out_of_range.
  [[nodiscard]] double summary_value(const std::string& name) const;
  [[nodiscard]] bool has_summary(const std::string& name) const;

  [[nodiscard]] std::string to_csv() const;
  [[nodiscard]] std::string to_json() const;
  [[nodiscard]] std::string render(ReportFormat format) const;
};

/// Shortest text that reads back to the same double ("nan", "inf", "-inf" otherwise).
std::string format_double(double v);

/// Writes text to path, or to stdout when path is empty.
void write_output(const std::string& path, const std::string& text);

}  // namespace deis
