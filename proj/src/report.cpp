#include "relulab/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "relulab/errors.hpp"
#include "relulab/trace.hpp"

namespace relulab {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string csv_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ReportTables build_report(const std::vector<std::string>& run_dirs) {
  if (run_dirs.empty()) throw ConfigError("report: no run directories given");
  ReportTables t;
  t.margins_csv = "run,t,margin\n";
  t.crossings_csv = "run,t,sign_flips,crossings\n";
  t.cosine_csv = "run,t,cos_prev\n";
  t.vmin_csv = "run,t,min_vhat\n";
  ojson runs = ojson::array();
  for (const auto& d : run_dirs) {
    fs::path dir = d;
    if (dir.filename().empty()) dir = dir.parent_path();
    const std::string name = dir.filename().string();
    std::ifstream tin(dir / "trace.jsonl");
    if (!tin) throw ConfigError("missing trace.jsonl in " + d);
    const auto records = read_trace(tin);
    ojson entry;
    entry["run"] = name;
    std::ifstream rin(dir / "report.json");
    if (!rin) throw ConfigError("missing report.json in " + d);
    try {
      entry["report"] = ojson::parse(rin);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(d + "/report.json: " + e.what());
    }
    runs.push_back(entry);

    long crossings = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& r = records[i];
      const bool changed = i == 0 ? r.sign_flips > 0 : r.pattern_hashes != records[i - 1].pattern_hashes;
      crossings += changed;
      const std::string head = name + "," + std::to_string(r.t) + ",";
      t.margins_csv += head + csv_double(r.margin) + "\n";
      t.crossings_csv += head + std::to_string(r.sign_flips) + "," + std::to_string(crossings) + "\n";
      t.cosine_csv += head + csv_double(r.cos_prev) + "\n";
      t.vmin_csv += head + csv_double(r.min_vhat) + "\n";
    }
  }
  t.merged["runs"] = runs;
  return t;
}

void write_report(const ReportTables& tables, const std::string& out_dir) {
  fs::create_directories(out_dir);
  auto put = [&](const char* name, const std::string& text) {
    std::ofstream out(fs::path(out_dir) / name, std::ios::binary);
    if (!out) throw Error(std::string("cannot write ") + name);
    out << text;
  };
  put("merged.json", tables.merged.dump(2) + "\n");
  put("margins.csv", tables.margins_csv);
  put("crossings.csv", tables.crossings_csv);
  put("cosine.csv", tables.cosine_csv);
  put("vmin.csv", tables.vmin_csv);
}

}  // namespace relulab
