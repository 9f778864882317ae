#pragma once

#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace treecast {

/// One output line. Exact rows carry a tolerance, Monte Carlo rows an
/// interval; verification gates set status to pass or fail.
struct ReportRow {
  std::string experiment;
  std::string parameters;  // "key=value;key=value"
  std::string quantity;
  double value = 0.0;
  std::optional<double> lo;
  std::optional<double> hi;
  std::string provenance;  // exact | mc | gate
  std::string tolerance;
  std::string status = "ok";
};

struct Report {
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::vector<ReportRow> rows;
};

inline const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> cols{"experiment", "parameters", "quantity",  "value", "lo",
                                             "hi",         "provenance", "tolerance", "status"};
  return cols;
}

// Shortest round-trip decimal form; "nan"/"inf" spelled out.
inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

// RFC 4180: quote fields holding a comma, quote or line break; double the quotes.
inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_csv(std::ostream& os, const Report& rep, bool reproducible) {
  if (!reproducible) os << "# generated: " << utc_timestamp() << "\r\n";
  os << "# config: " << rep.config.dump() << "\r\n";
  const auto& cols = report_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << "\r\n";
  for (const auto& r : rep.rows) {
    os << csv_field(r.experiment) << ',' << csv_field(r.parameters) << ',' << csv_field(r.quantity) << ','
       << format_number(r.value) << ',' << (r.lo ? format_number(*r.lo) : "") << ','
       << (r.hi ? format_number(*r.hi) : "") << ',' << csv_field(r.provenance) << ',' << csv_field(r.tolerance)
       << ',' << csv_field(r.status) << "\r\n";
  }
}

inline nlohmann::ordered_json number_json(double x) {
  if (std::isfinite(x)) return x;
  return format_number(x);
}

// Same rows as the CSV, one object each, with the resolved config attached.
inline nlohmann::ordered_json report_json(const Report& rep) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : rep.rows) {
    nlohmann::ordered_json o;
    o["experiment"] = r.experiment;
    o["parameters"] = r.parameters;
    o["quantity"] = r.quantity;
    o["value"] = number_json(r.value);
    o["lo"] = r.lo ? number_json(*r.lo) : nlohmann::ordered_json(nullptr);
    o["hi"] = r.hi ? number_json(*r.hi) : nlohmann::ordered_json(nullptr);
    o["provenance"] = r.provenance;
    o["tolerance"] = r.tolerance;
    o["status"] = r.status;
    o["config"] = rep.config;
    arr.push_back(std::move(o));
  }
  return arr;
}

inline void write_json(std::ostream& os, const Report& rep) { os << report_json(rep).dump(2) << '\n'; }

}  // namespace treecast
