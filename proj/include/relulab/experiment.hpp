#pragma once

// Training runs, the assumption audits computed from them, and the files a
// run directory holds:
//   config.cfg   canonical config text
//   trace.jsonl  one StepRecord per line
//   vectors.bin  parameter trajectory and gradients (binary, see write_vectors)
//   init.json / final.json  checkpoints
//   summary.json, report.json, carpet.jsonl

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "relulab/bounds.hpp"
#include "relulab/config.hpp"
#include "relulab/net.hpp"
#include "relulab/trace.hpp"

namespace relulab {

enum class Verdict { pass, fail, informational, insufficient_data };

std::string verdict_name(Verdict v);

struct AuditResult {
  std::string name;
  nlohmann::ordered_json measured = nlohmann::ordered_json::object();
  nlohmann::ordered_json threshold = nlohmann::ordered_json::object();
  Verdict verdict = Verdict::informational;
  std::string notes;
};

nlohmann::ordered_json to_json(const AuditResult& a);

/// Everything the audits read.
struct RunData {
  ExperimentConfig config;
  Dataset data;
  Matrix probes;
  std::vector<StepRecord> records;
  Matrix params;  // D x (T+1), theta_0 .. theta_T
  Matrix grads;   // D x T, gradient used by step t in column t-1
};

/// Trains from scratch. A non-finite loss or gradient throws NumericError
/// naming the step; `partial`, when given, receives the records made so far.
RunData train(const ExperimentConfig& config, std::vector<StepRecord>* partial = nullptr);

struct PhaseTwoFit {
  long points = 0;
  double slope = 0.0;
  double factor = 1.0;  // exp(slope), the fitted per-step contraction
};

/// Least-squares fit of log(L_t - L_ref) against t over t > t_from, skipping
/// non-positive gaps. Fewer than 2 usable points leaves points < 2.
PhaseTwoFit fit_contraction(const std::vector<double>& losses, double L_ref, long t_from);

struct AuditOutcome {
  TraceSummary summary;
  BoundInputs inputs;
  BoundReport bounds;
  std::vector<AuditResult> audits;
  nlohmann::ordered_json report;
  std::optional<nlohmann::ordered_json> carpet_lines;
};

/// Pure function of the run data and the reference loss.
AuditOutcome run_audits(const RunData& run, double L_ref);

struct RunResult {
  RunData run;
  AuditOutcome outcome;
  std::string run_dir;
};

/// Train, audit and write the run directory under the effective report dir.
RunResult run_experiment(const ExperimentConfig& config);

/// Reload a run directory and recompute every audit from its files.
RunResult audit_run_dir(const std::string& run_dir);

/// Binary layout: "RLVEC1\0\0", uint64 D, uint64 T, then theta_0..theta_T and
/// g_1..g_T as little-endian doubles, one vector after another.
void write_vectors(std::ostream& os, const Matrix& params, const Matrix& grads);
void read_vectors(std::istream& is, Matrix& params, Matrix& grads);

nlohmann::ordered_json checkpoint_json(const Params& p);
Params checkpoint_from_json(const nlohmann::json& j);
Params load_checkpoint(const std::string& path);

nlohmann::ordered_json to_json(const TraceSummary& s);

/// Task identity for the reference loss table: generator, seed, size, noise, widths.
std::string task_key(const ExperimentConfig& config);

}  // namespace relulab
