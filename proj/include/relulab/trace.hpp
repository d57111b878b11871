#pragma once

// Per-step instrumentation of a training run and the empirical constants
// extracted from it.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "relulab/net.hpp"
#include "relulab/optim.hpp"

namespace relulab {

struct StepRecord {
  long t = 0;
  double alpha = 0.0;
  double loss = 0.0;          // at the parameters the step started from
  double grad_norm2 = 0.0;    // ||g||_2
  double delta_norm2 = 0.0;   // ||Delta_t||_2
  double delta_norm1 = 0.0;   // ||Delta_t||_1
  double cos_prev = 0.0;      // cosine to the previous delta, 0 if undefined
  double min_vhat = 0.0;      // min_j v_hat_j after the step
  double margin = 0.0;        // probe margin before the step
  std::vector<std::uint64_t> pattern_hashes;  // per probe, after the step
  long sign_flips = 0;        // pattern bits changed by the step, summed over probes
  // Extra columns needed to recompute every audit from the trace alone.
  double lipschitz = 0.0;     // lipschitz_estimate before the step
  long k_max = 0;             // max active units on a probe, after the step
  std::string active_any;     // hex bitmask of units active on some probe, after the step
  double m_inf = 0.0;         // ||m_hat||_inf after the step

  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

/// Stateful per-run recorder. Owns the frozen probe set and the previous
/// delta needed for cos_prev.
class TraceRecorder {
 public:
  explicit TraceRecorder(Matrix probes, bool keep_bits = false);

  StepRecord record(long t, double alpha, double loss, const Params& before, const Params& after,
                    const Params& grad, const OptimState& state, const OptimConfig& config);

  const Matrix& probes() const noexcept { return probes_; }
  /// Full bit vectors per step (debug mode only).
  const std::vector<std::vector<std::uint8_t>>& bit_history() const noexcept { return bits_; }

 private:
  Matrix probes_;
  bool keep_bits_;
  std::optional<Vector> prev_delta_;
  std::vector<std::vector<std::uint8_t>> bits_;
};

/// Cosine between two vectors; 0 when either is zero.
double cosine_or_zero(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b);

/// Hex encoding of a bit vector, least significant unit first in each nibble.
std::string bits_to_hex(std::span<const std::uint8_t> bits);
std::vector<std::uint8_t> hex_to_bits(const std::string& hex, std::size_t n);

struct CrossingCount {
  long crossings = 0;
  long distinct_patterns = 0;
  long T0_emp = 0;
};

CrossingCount crossings_count(const std::vector<StepRecord>& records);

struct EffectiveDimension {
  double value = 0.0;
  bool degenerate = false;
};

/// Participation ratio (sum lambda)^2 / sum lambda^2 of the Gram spectrum of
/// the last `window` gradients (one per column).
EffectiveDimension effective_dimension(const Eigen::Ref<const Matrix>& grads, int window);

struct SubgaussianEstimate {
  double sigma = 0.0;
  double tail_fraction = 0.0;  // fraction beyond 3 sigma on the top direction
  bool tail_ok = true;         // tail_fraction <= 0.01
};

/// sigma_hat = sqrt(top eigenvalue of the centred noise covariance). Samples are columns.
SubgaussianEstimate subgaussian_sigma(const Eigen::Ref<const Matrix>& noise);

struct AngularAudit {
  double fraction_violating = 0.0;
  double theta_q99 = 0.0;
  long steps = 0;
};

AngularAudit angular_audit(const std::vector<StepRecord>& records, double epsilon, long T_from);

/// Linear-interpolated percentile, q in [0, 1].
double percentile(std::vector<double> values, double q);

struct TraceSummary {
  long steps = 0;
  long T0_emp = 0;
  long crossings = 0;
  long distinct_patterns = 0;
  long k_max = 0;
  long k_star = 0;
  double d_eff_emp = 0.0;
  bool d_eff_degenerate = false;
  double path_len_l2 = 0.0;
  double path_len_l1 = 0.0;
  double sigma_hat = 0.0;
  double sigma_tail_fraction = 0.0;
  double theta_ang_q99 = 0.0;
  double G_max_emp = 0.0;
  double B_step = 0.0;
  // d_eff recomputed every `window` steps (step index, value)
  std::vector<std::pair<long, double>> d_eff_series;
};

struct SummaryOptions {
  int d_eff_window = 64;
  long hidden_units = 0;  // N, bounds k_star
};

/// Run-level constants. `grads` holds one gradient per column (may be empty);
/// `noise` holds gradient-noise samples per column (may be empty).
TraceSummary summarize(const std::vector<StepRecord>& records, const Eigen::Ref<const Matrix>& grads,
                       const Eigen::Ref<const Matrix>& noise, const SummaryOptions& options = {});

// JSONL trajectory log: one object per line, fixed field order, 17 significant digits.
std::string format_double(double v);
std::string to_json_line(const StepRecord& r);
StepRecord parse_json_line(const std::string& line);
void write_trace(std::ostream& os, const std::vector<StepRecord>& records);
std::vector<StepRecord> read_trace(std::istream& is);

}  // namespace relulab
