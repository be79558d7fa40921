#include "spde_hmm/report.hpp"

#include "spde_hmm/errors.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>

namespace spde_hmm {

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

CsvTable& CsvTable::row(std::vector<std::string> cells) {
  if (cells.size() != header_.size()) throw StructuralError("csv row width does not match the header");
  rows_.push_back(std::move(cells));
  return *this;
}

std::string CsvTable::str() const {
  std::string out;
  auto line = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

CsvTable errors_table(const ErrorReport& report) {
  CsvTable table({"parameter", "time", "strong_rms", "strong_se", "weak", "weak_se"});
  for (const auto& s : report.series) {
    const bool has_weak = !s.weak.empty();
    table.row({format_number(s.parameter), format_number(s.time), format_number(s.strong),
               format_number(s.strong_se), has_weak ? format_number(s.weak[0]) : "",
               has_weak ? format_number(s.weak_se[0]) : ""});
  }
  return table;
}

CsvTable rates_table(const ErrorReport& report) {
  CsvTable table({"experiment", "metric", "slope", "slope_se", "intercept", "points"});
  for (const auto& f : report.fits) {
    table.row({report.experiment, f.metric, format_number(f.slope), format_number(f.slope_se),
               format_number(f.intercept), std::to_string(f.points)});
  }
  return table;
}

std::string report_json(const ErrorReport& report, const std::string& config_snapshot,
                        const std::string& seed_source) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["experiment"] = report.experiment;
  j["parameter_name"] = report.parameter_name;
  j["time_reduction"] = report.time_reduction;
  j["functionals"] = report.functionals;

  ordered_json rows = ordered_json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"parameter", r.parameter},
                    {"replicas", r.replicas},
                    {"strong", r.strong},
                    {"strong_se", r.strong_se},
                    {"strong_time", r.strong_time},
                    {"weak", r.weak},
                    {"weak_se", r.weak_se},
                    {"weak_time", r.weak_time}});
  }
  j["rows"] = rows;

  ordered_json fits = ordered_json::array();
  for (const auto& f : report.fits) {
    ordered_json fit{{"metric", f.metric}, {"points", f.points}, {"warnings", f.warnings}};
    // NaN slopes (undefined fits) become null.
    fit["slope"] = std::isfinite(f.slope) ? ordered_json(f.slope) : ordered_json(nullptr);
    fit["slope_se"] = std::isfinite(f.slope_se) ? ordered_json(f.slope_se) : ordered_json(nullptr);
    fit["intercept"] = std::isfinite(f.intercept) ? ordered_json(f.intercept) : ordered_json(nullptr);
    fits.push_back(fit);
  }
  j["fits"] = fits;

  ordered_json entries = ordered_json::array();
  for (const auto& e : report.manifest.entries) {
    entries.push_back({{"parameter", e.parameter},
                       {"first_replica", e.first_replica},
                       {"replica_count", e.replica_count},
                       {"roles", e.roles}});
  }
  j["seed_manifest"] = {{"seed", report.manifest.seed},
                        {"seed_source", seed_source},
                        {"generator", "philox4x32-10"},
                        {"stream_key", "(seed, replica, role)"},
                        {"entries", entries}};
  j["config"] = config_snapshot;
  return j.dump(2) + "\n";
}

}  // namespace spde_hmm
