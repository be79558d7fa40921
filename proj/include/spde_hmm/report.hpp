#pragma once

// On-disk artifacts: report.json, errors.csv, rates.csv and the small CSV
// tables of the diagnostic subcommands. Numbers are written in shortest
// round-trip form so reruns are byte-identical.

#include "spde_hmm/harness.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace spde_hmm {

/// Shortest decimal that parses back to the same double; "nan"/"inf" otherwise.
std::string format_number(double value);

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  CsvTable& row(std::vector<std::string> cells);
  std::string str() const;
  std::size_t rows() const noexcept { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

void write_text(const std::filesystem::path& path, const std::string& text);

/// parameter,time,strong_rms,strong_se,weak,weak_se (weak columns from the first functional).
CsvTable errors_table(const ErrorReport& report);
/// experiment,metric,slope,slope_se,intercept,points
CsvTable rates_table(const ErrorReport& report);

/// JSON text of the full report plus the run context.
std::string report_json(const ErrorReport& report, const std::string& config_snapshot,
                        const std::string& seed_source);

}  // namespace spde_hmm
