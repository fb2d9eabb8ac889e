#include "tailmask/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "tailmask/error.hpp"

namespace tailmask {

namespace {

double one_decimal(double x) { return std::round(x * 10.0) / 10.0; }

std::string fixed1(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f", one_decimal(x));
  return buf;
}

}  // namespace

std::string format_delta(double value, double baseline) {
  const double v = one_decimal(value);
  const double b = one_decimal(baseline);
  if (b == 0.0) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%+.1f%%", (v - b) / b * 100.0);
  std::string out = buf;
  if (out == "-0.0%") out = "+0.0%";
  return out;
}

void write_report(std::span<const ReportRow> rows, const std::filesystem::path& path) {
  if (rows.empty()) throw DomainError("report has no rows");
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "method,strategy,K,metric,value,baseline,delta\n";
  for (const auto& row : rows) {
    out << row.method << ',' << row.strategy << ',' << row.k << ',' << row.metric << ',' << fixed1(row.value) << ',';
    if (row.baseline) out << fixed1(*row.baseline) << ',' << format_delta(row.value, *row.baseline);
    else out << ',';
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace tailmask
