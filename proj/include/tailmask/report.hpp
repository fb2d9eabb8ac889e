#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>

namespace tailmask {

/// One table cell in percent, optionally compared against a baseline.
struct ReportRow {
  std::string method;
  std::string strategy;
  int k = 0;
  std::string metric;  // "R" or "mR"
  double value = 0.0;
  std::optional<double> baseline;
};

/// Signed relative change with one decimal, e.g. 8.0 -> 9.4 gives "+17.5%".
/// Returns "n/a" for a zero baseline.
std::string format_delta(double value, double baseline);

/// CSV: method,strategy,K,metric,value,baseline,delta. Baseline rows leave the last two empty.
/// Throws DomainError for an empty row list and IoError when the path is not writable.
void write_report(std::span<const ReportRow> rows, const std::filesystem::path& path);

}  // namespace tailmask
