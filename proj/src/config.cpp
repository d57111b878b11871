#include "relulab/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "relulab/bounds.hpp"
#include "relulab/errors.hpp"
#include "relulab/trace.hpp"

namespace relulab {

void DatasetSpec::validate() const {
  if (n_samples < 1) throw ConfigError("dataset.n_samples must be >= 1");
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw ConfigError("dataset.noise must be finite and >= 0");
}

std::string dataset_kind_name(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::gaussian_blobs: return "gaussian_blobs";
    case DatasetKind::teacher_net: return "teacher_net";
    case DatasetKind::xor_ring: return "xor_ring";
  }
  return "";
}

LossKind default_loss(DatasetKind kind, int output_dim) {
  if (kind == DatasetKind::gaussian_blobs && output_dim > 1) return LossKind::cross_entropy_with_logits;
  if (kind == DatasetKind::xor_ring && output_dim > 1) return LossKind::cross_entropy_with_logits;
  return LossKind::squared_error;
}

void ExperimentConfig::validate() const {
  try {
    net.validate();
    optim.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  dataset.validate();
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (probe_size < 1) throw ConfigError("probe_size must be >= 1");
  if (d_eff_window < 2) throw ConfigError("trace.d_eff_window must be >= 2");
  if (barrier_resolution < 1) throw ConfigError("barrier.path_resolution must be >= 1");
  if (barrier_waypoints < 1) throw ConfigError("barrier.waypoints must be >= 1");
  if (kakeya_n_dirs < 1) throw ConfigError("kakeya.n_dirs must be >= 1");
  if (!(angular_eps > 0.0)) throw ConfigError("audit.angular_eps must be > 0");
  if (!(spectral_delta > 0.0 && spectral_delta < 1.0)) throw ConfigError("audit.spectral_delta must lie in (0, 1)");
  if (dataset.kind == DatasetKind::xor_ring && net.layer_dims.front() != 2) {
    throw ConfigError("xor_ring needs net.layer_dims to start with 2");
  }
  if (dataset.kind == DatasetKind::gaussian_blobs && net.layer_dims.back() < 2) {
    throw ConfigError("gaussian_blobs needs at least 2 outputs");
  }
  for (const auto& a : audits) {
    if (!all_audits().contains(a)) throw ConfigError("unknown audit: " + a);
  }
}

std::string ExperimentConfig::effective_report_dir() const {
  if (const char* env = std::getenv("RELULAB_REPORT_DIR"); env && *env) return env;
  return report_dir;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0' || errno == ERANGE) throw ConfigError(key + ": not a number: " + v);
  return d;
}

long to_long(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const long n = std::strtol(v.c_str(), &end, 10);
  if (v.empty() || *end != '\0' || errno == ERANGE) throw ConfigError(key + ": not an integer: " + v);
  return n;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  if (!v.empty() && v[0] == '-') throw ConfigError(key + ": must be non-negative");
  const unsigned long long n = std::strtoull(v.c_str(), &end, 10);
  if (v.empty() || *end != '\0' || errno == ERANGE) throw ConfigError(key + ": not an integer: " + v);
  return n;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false");
}

nlohmann::json to_json_scalar(const std::string& key, const std::string& v) {
  if (v.find_first_of(".eEn") == std::string::npos) {
    char* end = nullptr;
    const long n = std::strtol(v.c_str(), &end, 10);
    if (!v.empty() && *end == '\0') return n;
  }
  return to_double(key, v);
}

LossKind parse_loss(const std::string& v) {
  if (v == "squared_error") return LossKind::squared_error;
  if (v == "cross_entropy") return LossKind::cross_entropy_with_logits;
  throw ConfigError("dataset.loss: expected squared_error or cross_entropy");
}

std::string loss_name(LossKind k) {
  return k == LossKind::squared_error ? "squared_error" : "cross_entropy";
}

}  // namespace

ExperimentConfig parse_config(std::istream& is) {
  ExperimentConfig c;
  std::string line;
  int lineno = 0;
  double gamma = 0.05, kappa = 0.5, pc = 1e-2, eta = 0.75;
  std::string schedule = "log_power";
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string v = trim(line.substr(eq + 1));
    if (key == "net.layer_dims") {
      c.net.layer_dims.clear();
      for (const auto& s : split_list(v)) c.net.layer_dims.push_back(static_cast<int>(to_long(key, s)));
    } else if (key == "net.init_scale") {
      c.net.init_scale = to_double(key, v);
    } else if (key == "net.seed") {
      c.net.seed = to_u64(key, v);
    } else if (key == "optim.beta1") {
      c.optim.beta1 = to_double(key, v);
    } else if (key == "optim.beta2") {
      c.optim.beta2 = to_double(key, v);
    } else if (key == "optim.epsilon") {
      c.optim.epsilon = to_double(key, v);
    } else if (key == "optim.schedule") {
      if (v != "log_power" && v != "power") throw ConfigError("optim.schedule: expected log_power or power");
      schedule = v;
    } else if (key == "optim.gamma") {
      gamma = to_double(key, v);
    } else if (key == "optim.kappa") {
      kappa = to_double(key, v);
    } else if (key == "optim.c") {
      pc = to_double(key, v);
    } else if (key == "optim.eta") {
      eta = to_double(key, v);
    } else if (key == "optim.weight_decay") {
      c.optim.weight_decay = to_double(key, v);
    } else if (key == "optim.decoupled") {
      c.optim.decoupled = to_bool(key, v);
    } else if (key == "dataset.kind") {
      if (v == "gaussian_blobs") c.dataset.kind = DatasetKind::gaussian_blobs;
      else if (v == "teacher_net") c.dataset.kind = DatasetKind::teacher_net;
      else if (v == "xor_ring") c.dataset.kind = DatasetKind::xor_ring;
      else throw ConfigError("dataset.kind: unknown generator " + v);
    } else if (key == "dataset.n_samples") {
      c.dataset.n_samples = to_long(key, v);
    } else if (key == "dataset.noise") {
      c.dataset.noise = to_double(key, v);
    } else if (key == "dataset.seed") {
      c.dataset.seed = to_u64(key, v);
    } else if (key == "dataset.loss") {
      c.dataset.loss = parse_loss(v);
    } else if (key == "steps") {
      c.steps = to_long(key, v);
    } else if (key == "probe_size") {
      c.probe_size = to_long(key, v);
    } else if (key == "report_dir") {
      c.report_dir = v;
    } else if (key == "run_name") {
      if (v.empty() || v.find('/') != std::string::npos) throw ConfigError("run_name must be a plain name");
      c.run_name = v;
    } else if (key == "audits") {
      c.audits.clear();
      for (const auto& s : split_list(v)) c.audits.insert(s);
    } else if (key == "trace.d_eff_window") {
      c.d_eff_window = static_cast<int>(to_long(key, v));
    } else if (key == "trace.debug_bits") {
      c.debug_bits = to_bool(key, v);
    } else if (key == "barrier.path_resolution") {
      c.barrier_resolution = static_cast<int>(to_long(key, v));
    } else if (key == "barrier.waypoints") {
      c.barrier_waypoints = to_long(key, v);
    } else if (key == "barrier.extra_seeds") {
      c.barrier_extra_seeds.clear();
      for (const auto& x : split_list(v)) c.barrier_extra_seeds.push_back(to_u64(key, x));
    } else if (key == "kakeya.n_dirs") {
      c.kakeya_n_dirs = static_cast<int>(to_long(key, v));
    } else if (key == "audit.angular_eps") {
      c.angular_eps = to_double(key, v);
    } else if (key == "audit.spectral_delta") {
      c.spectral_delta = to_double(key, v);
    } else if (key.starts_with("bounds.")) {
      const std::string field = key.substr(7);
      if (field == "eps_adv") {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& s : split_list(v)) arr.push_back(to_double(key, s));
        c.bound_overrides[field] = arr;
      } else {
        c.bound_overrides[field] = to_json_scalar(key, v);
      }
    } else {
      throw ConfigError("line " + std::to_string(lineno) + ": unknown key " + key);
    }
  }
  if (schedule == "log_power") c.optim.schedule = LogPowerSchedule{gamma, kappa};
  else c.optim.schedule = PowerSchedule{pc, eta};
  // Reject unknown bound fields now rather than after training.
  BoundInputs probe;
  probe.merge_json(c.bound_overrides);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  return parse_config(in);
}

std::string to_text(const ExperimentConfig& c) {
  std::ostringstream os;
  auto join_dims = [&] {
    std::string s;
    for (std::size_t i = 0; i < c.net.layer_dims.size(); ++i) {
      if (i) s += ',';
      s += std::to_string(c.net.layer_dims[i]);
    }
    return s;
  };
  os << "net.layer_dims = " << join_dims() << '\n';
  os << "net.init_scale = " << format_double(c.net.init_scale) << '\n';
  os << "net.seed = " << c.net.seed << '\n';
  os << "optim.beta1 = " << format_double(c.optim.beta1) << '\n';
  os << "optim.beta2 = " << format_double(c.optim.beta2) << '\n';
  os << "optim.epsilon = " << format_double(c.optim.epsilon) << '\n';
  if (const auto* lp = std::get_if<LogPowerSchedule>(&c.optim.schedule)) {
    os << "optim.schedule = log_power\n";
    os << "optim.gamma = " << format_double(lp->gamma) << '\n';
    os << "optim.kappa = " << format_double(lp->kappa) << '\n';
  } else {
    const auto& p = std::get<PowerSchedule>(c.optim.schedule);
    os << "optim.schedule = power\n";
    os << "optim.c = " << format_double(p.c) << '\n';
    os << "optim.eta = " << format_double(p.eta) << '\n';
  }
  os << "optim.weight_decay = " << format_double(c.optim.weight_decay) << '\n';
  os << "optim.decoupled = " << (c.optim.decoupled ? "true" : "false") << '\n';
  os << "dataset.kind = " << dataset_kind_name(c.dataset.kind) << '\n';
  os << "dataset.n_samples = " << c.dataset.n_samples << '\n';
  os << "dataset.noise = " << format_double(c.dataset.noise) << '\n';
  os << "dataset.seed = " << c.dataset.seed << '\n';
  if (c.dataset.loss) os << "dataset.loss = " << loss_name(*c.dataset.loss) << '\n';
  os << "steps = " << c.steps << '\n';
  os << "probe_size = " << c.probe_size << '\n';
  os << "report_dir = " << c.report_dir << '\n';
  os << "run_name = " << c.run_name << '\n';
  os << "audits = ";
  bool first = true;
  for (const auto& a : c.audits) {
    os << (first ? "" : ",") << a;
    first = false;
  }
  os << '\n';
  os << "trace.d_eff_window = " << c.d_eff_window << '\n';
  os << "trace.debug_bits = " << (c.debug_bits ? "true" : "false") << '\n';
  os << "barrier.path_resolution = " << c.barrier_resolution << '\n';
  os << "barrier.waypoints = " << c.barrier_waypoints << '\n';
  if (!c.barrier_extra_seeds.empty()) {
    os << "barrier.extra_seeds = ";
    for (std::size_t i = 0; i < c.barrier_extra_seeds.size(); ++i) os << (i ? "," : "") << c.barrier_extra_seeds[i];
    os << '\n';
  }
  os << "kakeya.n_dirs = " << c.kakeya_n_dirs << '\n';
  os << "audit.angular_eps = " << format_double(c.angular_eps) << '\n';
  os << "audit.spectral_delta = " << format_double(c.spectral_delta) << '\n';
  for (const auto& [k, v] : c.bound_overrides.items()) {
    os << "bounds." << k << " = ";
    if (v.is_array()) {
      for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << format_double(v[i].get<double>());
    } else if (v.is_number_integer()) {
      os << v.get<long>();
    } else {
      os << format_double(v.get<double>());
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace relulab
