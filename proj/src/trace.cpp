#include "relulab/trace.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <set>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "relulab/errors.hpp"

namespace relulab {

double cosine_or_zero(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

std::string bits_to_hex(std::span<const std::uint8_t> bits) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out((bits.size() + 3) / 4, '0');
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) {
      const auto nib = static_cast<std::size_t>(out[i / 4] <= '9' ? out[i / 4] - '0' : out[i / 4] - 'a' + 10);
      out[i / 4] = digits[nib | (1u << (i % 4))];
    }
  }
  return out;
}

std::vector<std::uint8_t> hex_to_bits(const std::string& hex, std::size_t n) {
  std::vector<std::uint8_t> bits(n, 0);
  for (std::size_t i = 0; i < n && i / 4 < hex.size(); ++i) {
    const char c = hex[i / 4];
    const int nib = c <= '9' ? c - '0' : c - 'a' + 10;
    bits[i] = static_cast<std::uint8_t>((nib >> (i % 4)) & 1);
  }
  return bits;
}

TraceRecorder::TraceRecorder(Matrix probes, bool keep_bits)
    : probes_(std::move(probes)), keep_bits_(keep_bits) {}

StepRecord TraceRecorder::record(long t, double alpha, double loss, const Params& before,
                                 const Params& after, const Params& grad, const OptimState& state,
                                 const OptimConfig& config) {
  if (!before.same_shape(after) || !before.same_shape(grad)) {
    throw ShapeError("record_step: parameter shapes differ");
  }
  if (probes_.rows() != before.dims().front()) throw ShapeError("probe dimension mismatch");

  StepRecord r;
  r.t = t;
  r.alpha = alpha;
  r.loss = loss;
  r.grad_norm2 = grad.vec().norm();
  const Vector delta = after.vec() - before.vec();
  r.delta_norm2 = delta.norm();
  r.delta_norm1 = delta.lpNorm<1>();
  r.cos_prev = prev_delta_ ? cosine_or_zero(delta, *prev_delta_) : 0.0;
  prev_delta_ = delta;

  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.t));
  if (state.t > 0 && state.v.size() > 0) {
    r.min_vhat = state.v.vec().minCoeff() / c2;
    r.m_inf = state.m.vec().cwiseAbs().maxCoeff() / c1;
  }

  const Matrix z_before = hidden_preacts(before, probes_);
  const Matrix z_after = hidden_preacts(after, probes_);
  r.margin = z_before.size() == 0 ? std::numeric_limits<double>::infinity()
                                  : z_before.cwiseAbs().minCoeff();
  r.lipschitz = lipschitz_estimate(before, probes_);

  const auto units = static_cast<std::size_t>(z_after.rows());
  std::vector<std::uint8_t> bits(units);
  std::vector<std::uint8_t> any(units, 0);
  for (Eigen::Index c = 0; c < z_after.cols(); ++c) {
    long active = 0;
    for (std::size_t i = 0; i < units; ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      bits[i] = z_after(row, c) > 0.0 ? 1 : 0;
      const bool was = z_before(row, c) > 0.0;
      r.sign_flips += (bits[i] != static_cast<std::uint8_t>(was));
      active += bits[i];
      any[i] |= bits[i];
    }
    r.k_max = std::max(r.k_max, active);
    r.pattern_hashes.push_back(pattern_hash(bits));
    if (keep_bits_) bits_.push_back(bits);
  }
  r.active_any = bits_to_hex(any);
  return r;
}

CrossingCount crossings_count(const std::vector<StepRecord>& records) {
  if (records.empty()) throw InsufficientDataError("crossings_count: empty trace");
  CrossingCount c;
  std::set<std::vector<std::uint64_t>> seen;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    seen.insert(r.pattern_hashes);
    // The first record has no predecessor in the trace; its flips compare
    // against the initial parameters.
    const bool changed =
        i == 0 ? r.sign_flips > 0 : r.pattern_hashes != records[i - 1].pattern_hashes;
    if (changed) ++c.crossings;
    if (r.sign_flips > 0) c.T0_emp = static_cast<long>(i) + 1;
  }
  c.distinct_patterns = static_cast<long>(seen.size());
  return c;
}

EffectiveDimension effective_dimension(const Eigen::Ref<const Matrix>& grads, int window) {
  if (window < 2) throw DomainError("window", "must be >= 2");
  if (grads.cols() < window) {
    throw InsufficientDataError("effective_dimension: need " + std::to_string(window) +
                                " gradients, have " + std::to_string(grads.cols()));
  }
  const Matrix g = grads.rightCols(window);
  const Matrix gram = g.transpose() * g;
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
  const Vector& lam = es.eigenvalues();
  const double lmax = lam.maxCoeff();
  EffectiveDimension r;
  if (!(lmax > 0.0)) {
    r.degenerate = true;
    return r;
  }
  double s1 = 0.0;
  double s2 = 0.0;
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (lam(i) < 1e-12 * lmax) continue;
    s1 += lam(i);
    s2 += lam(i) * lam(i);
  }
  r.value = s1 * s1 / s2;
  return r;
}

SubgaussianEstimate subgaussian_sigma(const Eigen::Ref<const Matrix>& noise) {
  if (noise.cols() < 30) {
    throw InsufficientDataError("subgaussian_sigma: need >= 30 samples, have " +
                                std::to_string(noise.cols()));
  }
  const auto n = static_cast<double>(noise.cols());
  Matrix x = noise;
  x.colwise() -= x.rowwise().mean();
  SubgaussianEstimate r;
  Vector u;
  double top = 0.0;
  if (x.rows() <= x.cols()) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(x * x.transpose() / n);
    top = es.eigenvalues()(es.eigenvalues().size() - 1);
    u = es.eigenvectors().col(es.eigenvalues().size() - 1);
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> es(x.transpose() * x / n);
    top = es.eigenvalues()(es.eigenvalues().size() - 1);
    u = x * es.eigenvectors().col(es.eigenvalues().size() - 1);
    if (u.norm() > 0.0) u.normalize();
  }
  r.sigma = std::sqrt(std::max(top, 0.0));
  if (r.sigma > 0.0) {
    const Vector proj = x.transpose() * u;
    const auto beyond = (proj.array().abs() > 3.0 * r.sigma).count();
    r.tail_fraction = static_cast<double>(beyond) / n;
  }
  r.tail_ok = r.tail_fraction <= 0.01;
  return r;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

AngularAudit angular_audit(const std::vector<StepRecord>& records, double epsilon, long T_from) {
  if (T_from < 0 || T_from >= static_cast<long>(records.size())) {
    throw DomainError("T_from", "must be smaller than the run length");
  }
  AngularAudit a;
  std::vector<double> angles;
  long violating = 0;
  // Index 0 has no previous delta to compare against.
  for (auto i = static_cast<std::size_t>(std::max(T_from, 1L)); i < records.size(); ++i) {
    const double c = records[i].cos_prev;
    if (c < 1.0 - epsilon) ++violating;
    angles.push_back(std::acos(std::clamp(c, -1.0, 1.0)));
  }
  a.steps = static_cast<long>(angles.size());
  if (a.steps > 0) a.fraction_violating = static_cast<double>(violating) / static_cast<double>(a.steps);
  a.theta_q99 = percentile(std::move(angles), 0.99);
  return a;
}

TraceSummary summarize(const std::vector<StepRecord>& records, const Eigen::Ref<const Matrix>& grads,
                       const Eigen::Ref<const Matrix>& noise, const SummaryOptions& options) {
  if (records.empty()) throw InsufficientDataError("summarize: empty trace");
  if (grads.cols() != 0 && grads.cols() != static_cast<Eigen::Index>(records.size())) {
    throw ShapeError("summarize: one gradient per record expected");
  }
  TraceSummary s;
  s.steps = static_cast<long>(records.size());
  const CrossingCount cc = crossings_count(records);
  s.T0_emp = cc.T0_emp;
  s.crossings = cc.crossings;
  s.distinct_patterns = cc.distinct_patterns;

  std::size_t units = 0;
  for (const auto& r : records) units = std::max(units, r.active_any.size() * 4);
  std::vector<std::uint8_t> any(units, 0);
  for (const auto& r : records) {
    s.k_max = std::max(s.k_max, r.k_max);
    s.path_len_l2 += r.delta_norm2;
    s.path_len_l1 += r.delta_norm1;
    s.G_max_emp = std::max(s.G_max_emp, r.grad_norm2);
    const auto bits = hex_to_bits(r.active_any, units);
    for (std::size_t i = 0; i < units; ++i) any[i] |= bits[i];
  }
  s.k_star = std::count(any.begin(), any.end(), std::uint8_t{1});
  if (options.hidden_units > 0) s.k_star = std::min(s.k_star, options.hidden_units);

  for (auto i = static_cast<std::size_t>(s.T0_emp); i < records.size(); ++i) {
    s.B_step = std::max(s.B_step, records[i].delta_norm2);
  }
  if (s.T0_emp < s.steps) s.theta_ang_q99 = angular_audit(records, 0.01, s.T0_emp).theta_q99;

  const int window = std::min<int>(options.d_eff_window, static_cast<int>(grads.cols()));
  if (window >= 2) {
    for (Eigen::Index end = window; end <= grads.cols(); end += window) {
      const auto e = effective_dimension(grads.leftCols(end), window);
      s.d_eff_series.emplace_back(static_cast<long>(end), e.value);
    }
    const auto last = effective_dimension(grads, window);
    s.d_eff_emp = last.value;
    s.d_eff_degenerate = last.degenerate;
  }
  if (noise.cols() >= 30) {
    const auto sg = subgaussian_sigma(noise);
    s.sigma_hat = sg.sigma;
    s.sigma_tail_fraction = sg.tail_fraction;
  }
  return s;
}

std::string format_double(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

double read_double(const nlohmann::json& j, const char* key, double if_null) {
  const auto& v = j.at(key);
  return v.is_null() ? if_null : v.get<double>();
}

}  // namespace

std::string to_json_line(const StepRecord& r) {
  std::string s = "{\"t\":" + std::to_string(r.t);
  s += ",\"alpha\":" + format_double(r.alpha);
  s += ",\"loss\":" + format_double(r.loss);
  s += ",\"grad_norm2\":" + format_double(r.grad_norm2);
  s += ",\"delta_norm2\":" + format_double(r.delta_norm2);
  s += ",\"delta_norm1\":" + format_double(r.delta_norm1);
  s += ",\"cos_prev\":" + format_double(r.cos_prev);
  s += ",\"min_vhat\":" + format_double(r.min_vhat);
  s += ",\"margin\":" + format_double(r.margin);
  s += ",\"pattern_hashes\":[";
  for (std::size_t i = 0; i < r.pattern_hashes.size(); ++i) {
    if (i) s += ',';
    s += '"' + hash_hex(r.pattern_hashes[i]) + '"';
  }
  s += "],\"sign_flips\":" + std::to_string(r.sign_flips);
  s += ",\"lipschitz\":" + format_double(r.lipschitz);
  s += ",\"k_max\":" + std::to_string(r.k_max);
  s += ",\"active_any\":\"" + r.active_any + '"';
  s += ",\"m_inf\":" + format_double(r.m_inf);
  s += '}';
  return s;
}

StepRecord parse_json_line(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  constexpr double inf = std::numeric_limits<double>::infinity();
  StepRecord r;
  r.t = j.at("t").get<long>();
  r.alpha = read_double(j, "alpha", nan);
  r.loss = read_double(j, "loss", nan);
  r.grad_norm2 = read_double(j, "grad_norm2", nan);
  r.delta_norm2 = read_double(j, "delta_norm2", nan);
  r.delta_norm1 = read_double(j, "delta_norm1", nan);
  r.cos_prev = read_double(j, "cos_prev", nan);
  r.min_vhat = read_double(j, "min_vhat", nan);
  r.margin = read_double(j, "margin", inf);
  for (const auto& h : j.at("pattern_hashes")) {
    r.pattern_hashes.push_back(std::stoull(h.get<std::string>(), nullptr, 16));
  }
  r.sign_flips = j.at("sign_flips").get<long>();
  r.lipschitz = read_double(j, "lipschitz", inf);
  r.k_max = j.at("k_max").get<long>();
  r.active_any = j.at("active_any").get<std::string>();
  r.m_inf = read_double(j, "m_inf", nan);
  return r;
}

void write_trace(std::ostream& os, const std::vector<StepRecord>& records) {
  for (const auto& r : records) os << to_json_line(r) << '\n';
}

std::vector<StepRecord> read_trace(std::istream& is) {
  std::vector<StepRecord> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    out.push_back(parse_json_line(line));
  }
  return out;
}

}  // namespace relulab
