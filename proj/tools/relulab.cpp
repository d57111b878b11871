#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "relulab/arrangement.hpp"
#include "relulab/barrier.hpp"
#include "relulab/bounds.hpp"
#include "relulab/config.hpp"
#include "relulab/datasets.hpp"
#include "relulab/errors.hpp"
#include "relulab/experiment.hpp"
#include "relulab/kakeya.hpp"
#include "relulab/report.hpp"
#include "relulab/trace.hpp"

namespace fs = std::filesystem;
using namespace relulab;
using ojson = nlohmann::ordered_json;

namespace {

std::string g5(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.5g", v);
  return buf;
}

nlohmann::json parse_overrides(const std::vector<std::string>& sets) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects field=value, got " + s);
    const std::string key = s.substr(0, eq);
    std::string value = s.substr(eq + 1);
    if (key == "eps_adv" && (value.empty() || value.front() != '[')) value = "[" + value + "]";
    try {
      j[key] = nlohmann::json::parse(value);
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("--set " + key + ": value is not a number");
    }
  }
  return j;
}

void print_audits(const std::vector<AuditResult>& audits) {
  for (const auto& a : audits) {
    std::cout << a.name << ' ' << verdict_name(a.verdict);
    if (!a.notes.empty()) std::cout << "  (" << a.notes << ')';
    std::cout << '\n';
  }
}

void print_bounds(const BoundReport& report) {
  for (const auto& r : report.rows) {
    std::cout << r.name << ' ';
    if (!r.exact.empty()) std::cout << r.exact;
    else if (r.value) std::cout << g5(*r.value);
    else std::cout << "n/a (" << r.error << ')';
    if (r.asymptotic) std::cout << "  [up to constants]";
    std::cout << '\n';
  }
}

int cmd_train(const std::string& config_path, const std::string& report_dir, const std::string& run_name, long steps,
              const std::vector<std::string>& sets, bool json) {
  ExperimentConfig cfg = load_config(config_path);
  if (!report_dir.empty()) cfg.report_dir = report_dir;
  if (!run_name.empty()) cfg.run_name = run_name;
  if (steps > 0) cfg.steps = steps;
  for (const auto& [k, v] : parse_overrides(sets).items()) cfg.bound_overrides[k] = v;
  BoundInputs check;
  check.merge_json(cfg.bound_overrides);
  const RunResult res = run_experiment(cfg);
  if (json) {
    std::cout << res.outcome.report.dump(2) << '\n';
  } else {
    std::cout << "run " << res.run_dir << '\n';
    std::cout << "final loss " << g5(res.outcome.report["final"]["final_loss"].get<double>()) << '\n';
    print_audits(res.outcome.audits);
  }
  return 0;
}

int cmd_audit(const std::string& run_dir, bool json) {
  const RunResult res = audit_run_dir(run_dir);
  if (json) std::cout << res.outcome.report.dump(2) << '\n';
  else print_audits(res.outcome.audits);
  return 0;
}

int cmd_bounds(const std::string& in_path, const std::vector<std::string>& sets, long horizon, bool json) {
  BoundInputs in;
  if (!in_path.empty()) {
    std::ifstream f(in_path);
    if (!f) throw ConfigError("cannot open " + in_path);
    nlohmann::json j;
    try {
      f >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(in_path + ": " + e.what());
    }
    in.merge_json(j);
  }
  in.merge_json(parse_overrides(sets));
  ReportExtras extras;
  extras.horizon = horizon;
  const BoundReport report = evaluate_bounds(in, extras);
  if (json) std::cout << to_json(report).dump(2) << '\n';
  else print_bounds(report);
  return 0;
}

int cmd_arrangement(const std::string& path, bool list_regions, bool tope) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open " + path);
  const Arrangement arr = read_arrangement(f);
  const ZaslavskyCheck z = verify_zaslavsky(arr);
  std::cout << "exact " << z.exact << ", bound " << z.bound << ", " << (z.tight ? "tight" : "not tight") << '\n';
  if (list_regions || tope) {
    const Regions regions = enumerate_regions(arr);
    if (list_regions) {
      for (const auto& cell : regions.cells) {
        for (auto s : cell) std::cout << (s > 0 ? '+' : '-');
        std::cout << '\n';
      }
    }
    if (tope) {
      const TopeGraph g = tope_graph(regions.cells);
      std::cout << "tope edges " << g.edges.size() << ", diameter " << g.diameter << '\n';
    }
  }
  return 0;
}

int cmd_barrier(const std::string& from, const std::string& to, const std::string& config_path, int resolution,
                bool json) {
  const ExperimentConfig cfg = load_config(config_path);
  const Dataset data = generate_dataset(cfg.dataset, cfg.net);
  const Params a = load_checkpoint(from);
  const Params b = load_checkpoint(to);
  if (!a.same_shape(b)) throw ShapeError("checkpoints have different layer_dims");
  if (a.dims() != cfg.net.layer_dims) throw ShapeError("checkpoint layer_dims differ from the config");
  const SegmentBarrier s = segment_barrier(a, b, data, resolution);
  ojson j;
  j["max_loss"] = s.max_loss;
  j["argmax_alpha"] = s.argmax_alpha;
  j["endpoint_max"] = s.endpoint_max;
  j["excess"] = s.excess();
  j["distance"] = (b.vec() - a.vec()).norm();
  if (json) {
    std::cout << j.dump(2) << '\n';
  } else {
    for (const auto& [k, v] : j.items()) std::cout << k << ' ' << g5(v.get<double>()) << '\n';
  }
  return 0;
}

int cmd_kakeya(const std::string& run_dir, double eps, int n_dirs, int rank, const std::string& out, bool json) {
  std::ifstream tin(fs::path(run_dir) / "trace.jsonl");
  if (!tin) throw ConfigError("missing trace.jsonl in " + run_dir);
  const auto records = read_trace(tin);
  std::ifstream vin(fs::path(run_dir) / "vectors.bin", std::ios::binary);
  if (!vin) throw ConfigError("missing vectors.bin in " + run_dir);
  Matrix params;
  Matrix grads;
  read_vectors(vin, params, grads);
  const long T = grads.cols();
  if (T < 1) throw InsufficientDataError("trajectory has no steps");
  const long from = std::min(crossings_count(records).T0_emp, T - 1);
  const Matrix deltas = params.rightCols(T - from) - params.middleCols(from, T - from);
  int target = rank;
  if (target < 1) {
    const int window = static_cast<int>(std::min<long>(64, T));
    target = window >= 2 ? static_cast<int>(std::lround(std::max(1.0, effective_dimension(grads, window).value))) : 1;
    target = std::min(target, 16);
  }
  const Carpet carpet = build_carpet(deltas, target);
  const Coverage cov = directional_coverage(carpet, n_dirs, eps);
  if (!out.empty()) {
    std::ofstream o(out, std::ios::binary);
    if (!o) throw Error("cannot write " + out);
    write_carpet(o, carpet);
  }
  ojson j;
  j["from_step"] = from;
  j["target_rank"] = carpet.target_rank;
  j["achieved_rank"] = carpet.achieved_rank;
  j["covered_fraction"] = cov.covered_fraction;
  j["worst_gap"] = cov.worst_gap;
  if (json) {
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << "rank " << carpet.achieved_rank << " of " << carpet.target_rank << '\n';
    std::cout << "covered_fraction " << g5(cov.covered_fraction) << '\n';
    std::cout << "worst_gap " << g5(cov.worst_gap) << '\n';
  }
  return 0;
}

int cmd_report(const std::vector<std::string>& runs, const std::string& out) {
  write_report(build_report(runs), out);
  std::cout << "wrote " << out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"relulab: ReLU training-dynamics audits"};
  app.require_subcommand(1);

  std::string config_path, report_dir, run_name, in_path, file, from, to, run_dir, out = "report";
  std::vector<std::string> sets, runs;
  long steps = 0;
  long horizon = 0;
  bool json = false, regions = false, tope = false;
  int resolution = 256, n_dirs = 512, rank = 0;
  double eps = 0.1;

  auto* train = app.add_subcommand("train", "run an experiment from a config file");
  train->add_option("--config,-c", config_path, "config file")->required()->check(CLI::ExistingFile);
  train->add_option("--report-dir", report_dir, "output root (RELULAB_REPORT_DIR wins)");
  train->add_option("--run-name", run_name, "run directory name");
  train->add_option("--steps", steps, "override the step count")->check(CLI::PositiveNumber);
  train->add_option("--set", sets, "bound input override, field=value");
  train->add_flag("--json", json, "print the report JSON");

  auto* audit = app.add_subcommand("audit", "recompute audits from a run directory");
  audit->add_option("--run", run_dir, "run directory")->required()->check(CLI::ExistingDirectory);
  audit->add_flag("--json", json, "print the report JSON");

  auto* bounds = app.add_subcommand("bounds", "evaluate bound formulas");
  bounds->add_option("--in", in_path, "JSON object of bound inputs")->check(CLI::ExistingFile);
  bounds->add_option("--set", sets, "field=value override");
  bounds->add_option("--horizon", horizon, "T for the gradient-rate row")->check(CLI::NonNegativeNumber);
  bounds->add_flag("--json", json, "print JSON rows");

  auto* arrangement = app.add_subcommand("arrangement", "enumerate an arrangement and compare with the region bound");
  arrangement->add_option("--file", file, "arrangement text file")->required()->check(CLI::ExistingFile);
  arrangement->add_flag("--regions", regions, "list sign vectors");
  arrangement->add_flag("--tope", tope, "tope graph edges and diameter");

  auto* barrier = app.add_subcommand("barrier", "loss barrier on the segment between two checkpoints");
  barrier->add_option("--from", from, "checkpoint JSON")->required()->check(CLI::ExistingFile);
  barrier->add_option("--to", to, "checkpoint JSON")->required()->check(CLI::ExistingFile);
  barrier->add_option("--config,-c", config_path, "config that defines the dataset")->required()->check(CLI::ExistingFile);
  barrier->add_option("--resolution", resolution, "grid intervals")->check(CLI::PositiveNumber);
  barrier->add_flag("--json", json, "print JSON");

  auto* kakeya = app.add_subcommand("kakeya", "directional coverage of a run's post-freeze steps");
  kakeya->add_option("--run", run_dir, "run directory")->required()->check(CLI::ExistingDirectory);
  kakeya->add_option("--eps", eps, "coverage tolerance")->check(CLI::Range(0.0, 2.0));
  kakeya->add_option("--dirs", n_dirs, "number of directions")->check(CLI::PositiveNumber);
  kakeya->add_option("--rank", rank, "carpet rank (default: measured d_eff)");
  kakeya->add_option("--out", out, "carpet JSONL output");
  kakeya->add_flag("--json", json, "print JSON");

  auto* report = app.add_subcommand("report", "merge run outputs into JSON and CSV tables");
  report->add_option("--runs", runs, "run directories")->required()->check(CLI::ExistingDirectory);
  report->add_option("--out", out, "output directory");

  if (argc <= 1) {
    std::cerr << app.help();
    return 2;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*train) return cmd_train(config_path, report_dir, run_name, steps, sets, json);
    if (*audit) return cmd_audit(run_dir, json);
    if (*bounds) return cmd_bounds(in_path, sets, horizon, json);
    if (*arrangement) return cmd_arrangement(file, regions, tope);
    if (*barrier) return cmd_barrier(from, to, config_path, resolution, json);
    if (*kakeya) return cmd_kakeya(run_dir, eps, n_dirs, rank, kakeya->count("--out") ? out : "", json);
    if (*report) return cmd_report(runs, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
