#pragma once

// Merging finished run directories into one JSON document and plot-ready
// CSV tables (header row, comma separator, LF, 17 significant digits).

#include <string>
#include <vector>

#include <json.hpp>

namespace relulab {

struct ReportTables {
  nlohmann::ordered_json merged;
  std::string margins_csv;    // run,t,margin
  std::string crossings_csv;  // run,t,sign_flips,crossings
  std::string cosine_csv;     // run,t,cos_prev
  std::string vmin_csv;       // run,t,min_vhat
};

ReportTables build_report(const std::vector<std::string>& run_dirs);

/// Writes merged.json, margins.csv, crossings.csv, cosine.csv, vmin.csv.
void write_report(const ReportTables& tables, const std::string& out_dir);

/// %.17g, with inf/-inf/nan spelled out.
std::string csv_double(double v);

}  // namespace relulab
