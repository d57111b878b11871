#pragma once

// Experiment configuration. Text format: `key = value` lines, `#` starts a
// comment, dotted keys select a section (net.layer_dims = 4,8,8,1).

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "relulab/net.hpp"
#include "relulab/optim.hpp"

namespace relulab {

enum class DatasetKind { gaussian_blobs, teacher_net, xor_ring };

struct DatasetSpec {
  DatasetKind kind = DatasetKind::teacher_net;
  long n_samples = 64;
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::optional<LossKind> loss;  // default depends on kind

  void validate() const;
};

std::string dataset_kind_name(DatasetKind kind);
LossKind default_loss(DatasetKind kind, int output_dim);

inline const std::set<std::string>& all_audits() {
  static const std::set<std::string> names{"L1", "L2", "L3", "L4", "L5", "L6", "L7", "bounds", "barrier", "kakeya"};
  return names;
}

struct ExperimentConfig {
  NetConfig net{{4, 8, 8, 1}, 1.0, 0};
  OptimConfig optim;
  DatasetSpec dataset;
  long steps = 1000;
  long probe_size = 256;
  std::string report_dir = "reports";
  std::string run_name = "run";
  std::set<std::string> audits = all_audits();
  nlohmann::json bound_overrides = nlohmann::json::object();
  int d_eff_window = 64;
  int barrier_resolution = 16;
  long barrier_waypoints = 64;
  std::vector<std::uint64_t> barrier_extra_seeds;  // net seeds for the equal-minimum comparison
  int kakeya_n_dirs = 512;
  double angular_eps = 0.01;
  double spectral_delta = 0.5;
  bool debug_bits = false;

  void validate() const;
  /// report_dir, replaced by $RELULAB_REPORT_DIR when set.
  std::string effective_report_dir() const;
};

ExperimentConfig parse_config(std::istream& is);
ExperimentConfig load_config(const std::string& path);
/// Canonical text form; parse_config(to_text(c)) == c field by field.
std::string to_text(const ExperimentConfig& config);

}  // namespace relulab
