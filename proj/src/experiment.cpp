#include "relulab/experiment.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "relulab/barrier.hpp"
#include "relulab/datasets.hpp"
#include "relulab/errors.hpp"
#include "relulab/kakeya.hpp"

namespace relulab {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string verdict_name(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::informational: return "informational";
    case Verdict::insufficient_data: return "insufficient_data";
  }
  return "";
}

ojson to_json(const AuditResult& a) {
  ojson j;
  j["name"] = a.name;
  j["measured"] = a.measured;
  j["threshold"] = a.threshold;
  j["verdict"] = verdict_name(a.verdict);
  j["notes"] = a.notes;
  return j;
}

namespace {

Params params_from(const std::vector<int>& dims, const Eigen::Ref<const Vector>& v) {
  Params p(dims);
  if (static_cast<Eigen::Index>(p.size()) != v.size()) throw ShapeError("parameter vector has the wrong length");
  p.vec() = v;
  return p;
}

Matrix reference_probes(const ExperimentConfig& c, const Dataset& data) {
  return select_probes(data, c.probe_size, c.dataset.seed);
}

}  // namespace

RunData train(const ExperimentConfig& config, std::vector<StepRecord>* partial) {
  config.validate();
  RunData run;
  run.config = config;
  run.data = generate_dataset(config.dataset, config.net);
  run.probes = reference_probes(config, run.data);

  Params theta = init_params(config.net);
  OptimState state = OptimState::zeros_like(theta);
  TraceRecorder recorder(run.probes, config.debug_bits);
  const auto D = static_cast<Eigen::Index>(theta.size());
  run.params.resize(D, config.steps + 1);
  run.grads.resize(D, config.steps);
  run.params.col(0) = theta.vec();
  run.records.reserve(static_cast<std::size_t>(config.steps));

  try {
    for (long t = 1; t <= config.steps; ++t) {
      LossGrad lg;
      try {
        lg = loss_and_grad(theta, run.data);
      } catch (const NumericError& e) {
        throw NumericError(e.what(), t);
      }
      AdamResult step = adam_step(theta, lg.grad, state, config.optim);
      if (!step.params.all_finite()) throw NumericError("non-finite parameters", t);
      run.records.push_back(
          recorder.record(t, step.alpha, lg.loss, theta, step.params, lg.grad, step.state, config.optim));
      run.grads.col(t - 1) = lg.grad.vec();
      run.params.col(t) = step.params.vec();
      theta = std::move(step.params);
      state = std::move(step.state);
    }
  } catch (const Error&) {
    if (partial) *partial = run.records;
    throw;
  }
  return run;
}

PhaseTwoFit fit_contraction(const std::vector<double>& losses, double L_ref, long t_from) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t t = static_cast<std::size_t>(std::max(t_from + 1, 0L)); t < losses.size(); ++t) {
    const double gap = losses[t] - L_ref;
    if (gap > 0.0 && std::isfinite(gap)) {
      xs.push_back(static_cast<double>(t));
      ys.push_back(std::log(gap));
    }
  }
  PhaseTwoFit fit;
  fit.points = static_cast<long>(xs.size());
  if (fit.points < 2) return fit;
  const double n = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  fit.slope = sxy / sxx;
  fit.factor = std::exp(fit.slope);
  return fit;
}

ojson to_json(const TraceSummary& s) {
  ojson j;
  j["steps"] = s.steps;
  j["T0_emp"] = s.T0_emp;
  j["crossings"] = s.crossings;
  j["distinct_patterns"] = s.distinct_patterns;
  j["k_max"] = s.k_max;
  j["k_star"] = s.k_star;
  j["d_eff_emp"] = s.d_eff_emp;
  j["d_eff_degenerate"] = s.d_eff_degenerate;
  j["path_len_l2"] = s.path_len_l2;
  j["path_len_l1"] = s.path_len_l1;
  j["sigma_hat"] = s.sigma_hat;
  j["sigma_tail_fraction"] = s.sigma_tail_fraction;
  j["theta_ang_q99"] = s.theta_ang_q99;
  j["G_max_emp"] = s.G_max_emp;
  j["B_step"] = s.B_step;
  ojson series = ojson::array();
  for (const auto& [t, v] : s.d_eff_series) series.push_back(ojson::array({t, v}));
  j["d_eff_series"] = series;
  return j;
}

namespace {

double median(std::vector<double> v) { return percentile(std::move(v), 0.5); }

// Replays the bias-corrected second moment from the stored gradients and
// returns, per step, its minimum over coordinates that ever saw a nonzero
// gradient. Coordinates of dead units never move and are left out.
std::vector<double> live_min_vhat(const RunData& run) {
  const auto& oc = run.config.optim;
  const Eigen::Index D = run.grads.rows();
  std::vector<char> live(static_cast<std::size_t>(D), 0);
  for (Eigen::Index j = 0; j < D; ++j) live[static_cast<std::size_t>(j)] = (run.grads.row(j).array() != 0.0).any();
  Vector v = Vector::Zero(D);
  std::vector<double> out;
  for (Eigen::Index t = 0; t < run.grads.cols(); ++t) {
    Vector g = run.grads.col(t);
    if (oc.weight_decay != 0.0 && !oc.decoupled) g += oc.weight_decay * run.params.col(t);
    v = oc.beta2 * v + (1.0 - oc.beta2) * g.cwiseProduct(g);
    const double c2 = 1.0 - std::pow(oc.beta2, static_cast<double>(t + 1));
    double m = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < D; ++j) {
      if (live[static_cast<std::size_t>(j)]) m = std::min(m, v(j) / c2);
    }
    out.push_back(std::isfinite(m) ? m : 0.0);
  }
  return out;
}

struct Context {
  const RunData& run;
  long T;
  long N;
  bool enough;
  std::vector<double> losses;  // L(theta_0) .. L(theta_T)
  Params final_params;
};

AuditResult audit_l1(const Context& c, const TraceSummary& s, double final_margin) {
  AuditResult a;
  a.name = "L1";
  a.measured["T0_emp"] = s.T0_emp;
  a.measured["steps"] = c.T;
  a.measured["final_margin"] = final_margin;
  a.threshold["T0_emp_below"] = c.T;
  a.threshold["final_margin_above"] = 0.0;
  if (!c.enough) {
    a.verdict = Verdict::insufficient_data;
    a.notes = "needs at least 2 steps";
    return a;
  }
  const bool ok = s.T0_emp < c.T && final_margin > 0.0;
  a.verdict = ok ? Verdict::pass : Verdict::fail;
  a.notes = ok ? "patterns froze before the end of the run" : "patterns still changing at the end of the run";
  return a;
}

AuditResult audit_stability(const Context& c) {
  const auto& recs = c.run.records;
  const auto& dims = c.run.config.net.layer_dims;
  long checked = 0;
  long violations = 0;
  long checked_s = 0;
  long violations_s = 0;
  long first_violation = -1;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto& r = recs[i];
    if (!std::isfinite(r.margin)) continue;
    if (r.lipschitz > 0.0 && r.delta_norm2 < r.margin / (2.0 * r.lipschitz)) {
      ++checked;
      if (r.sign_flips > 0) {
        ++violations;
        if (first_violation < 0) first_violation = r.t;
      }
    }
    const Params before = params_from(dims, c.run.params.col(static_cast<Eigen::Index>(i)));
    const double sens = parameter_sensitivity(before, c.run.probes);
    if (sens > 0.0 && r.delta_norm2 < r.margin / (2.0 * sens)) {
      ++checked_s;
      violations_s += r.sign_flips > 0;
    }
  }
  AuditResult a;
  a.name = "stability_radius";
  a.measured["steps_inside_radius"] = checked;
  a.measured["violations"] = violations;
  a.measured["first_violation_step"] = first_violation;
  a.measured["steps_inside_sensitivity_radius"] = checked_s;
  a.measured["sensitivity_violations"] = violations_s;
  a.threshold["violations"] = 0;
  if (!c.enough) {
    a.verdict = Verdict::insufficient_data;
    return a;
  }
  a.verdict = violations == 0 ? Verdict::pass : Verdict::fail;
  a.notes = checked == 0 ? "no step fell inside the radius; the check is vacuous"
                         : "radius margin / (2 * lipschitz) per step";
  return a;
}

AuditResult audit_l2(const Context& c, const BoundInputs& in, const std::vector<double>& vmin, double lambda_hat,
                     double lambda_all, double delta) {
  AuditResult a;
  a.name = "L2";
  a.verdict = Verdict::informational;
  a.measured["lambda_SE_hat"] = lambda_hat;
  a.measured["lambda_SE_hat_all_coordinates"] = lambda_all;
  a.threshold["floor"] = (1.0 - delta) * lambda_hat;
  a.threshold["delta"] = delta;
  if (!c.enough) {
    a.verdict = Verdict::insufficient_data;
    return a;
  }
  double T1 = 0.0;
  try {
    T1 = t1_spectral(in);
  } catch (const DomainError& e) {
    a.notes = std::string("T1 unavailable: ") + e.what();
    return a;
  }
  a.measured["T1"] = T1;
  long total = 0;
  long above = 0;
  for (std::size_t i = 0; i < vmin.size(); ++i) {
    if (static_cast<double>(c.run.records[i].t) < T1) continue;
    ++total;
    above += vmin[i] >= (1.0 - delta) * lambda_hat;
  }
  a.measured["steps_after_T1"] = total;
  a.measured["fraction_above_floor"] = total > 0 ? static_cast<double>(above) / static_cast<double>(total) : 0.0;
  if (total == 0) a.notes = "T1 lies beyond the run";
  return a;
}

AuditResult audit_l3(const Context& c, const TraceSummary& s, long D) {
  AuditResult a;
  a.name = "L3";
  a.verdict = c.enough ? Verdict::informational : Verdict::insufficient_data;
  a.measured["d_eff_emp"] = s.d_eff_emp;
  a.measured["D"] = D;
  a.measured["lifted_D"] = static_cast<long>(lifted_param_count(c.run.config.net.layer_dims));
  a.measured["ratio"] = s.d_eff_emp / static_cast<double>(D);
  if (s.d_eff_degenerate) a.notes = "all gradients in the window are zero";
  return a;
}

AuditResult audit_l4(const Context& c, const TraceSummary& s) {
  AuditResult a;
  a.name = "L4";
  const long bound = c.N * s.T0_emp + (c.N - s.k_star) + 2 * s.k_max;
  a.measured["k_max"] = s.k_max;
  a.measured["k_star"] = s.k_star;
  a.measured["crossings"] = s.crossings;
  a.measured["distinct_patterns"] = s.distinct_patterns;
  a.threshold["crossing_bound"] = bound;
  if (!c.enough) {
    a.verdict = Verdict::insufficient_data;
    return a;
  }
  a.verdict = s.crossings <= bound ? Verdict::pass : Verdict::fail;
  a.notes = "crossings <= N * T0_emp + (N - k_star) + 2 * k_max";
  return a;
}

AuditResult audit_l5(const Context& c, const Matrix& noise) {
  AuditResult a;
  a.name = "L5";
  a.threshold["tail_fraction"] = 0.01;
  if (noise.cols() < 30) {
    a.verdict = Verdict::insufficient_data;
    a.notes = "needs at least 30 noise samples";
    return a;
  }
  const auto sg = subgaussian_sigma(noise);
  a.measured["sigma_hat"] = sg.sigma;
  a.measured["tail_fraction"] = sg.tail_fraction;
  a.measured["samples"] = static_cast<long>(noise.cols());
  a.verdict = !c.enough ? Verdict::insufficient_data : sg.tail_ok ? Verdict::pass : Verdict::fail;
  a.notes = "per-example gradient deviations at the final parameters";
  return a;
}

AuditResult audit_l6(const Context& c, const TraceSummary& s, double eps) {
  AuditResult a;
  a.name = "L6";
  a.threshold["epsilon"] = eps;
  a.threshold["max_fraction"] = 0.05;
  if (!c.enough || s.T0_emp + 1 >= c.T) {
    a.verdict = Verdict::insufficient_data;
    a.notes = "fewer than 2 steps after T0_emp";
    return a;
  }
  const auto aa = angular_audit(c.run.records, eps, s.T0_emp);
  a.measured["fraction_violating"] = aa.fraction_violating;
  a.measured["theta_q99"] = aa.theta_q99;
  a.measured["steps"] = aa.steps;
  a.verdict = aa.fraction_violating <= 0.05 ? Verdict::pass : Verdict::fail;
  return a;
}

AuditResult audit_affine(const Context& c) {
  AuditResult a;
  a.name = "affine_error";
  a.verdict = Verdict::informational;
  const auto& recs = c.run.records;
  double err = 0.0;
  double sq = 0.0;
  long used = 0;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    if (recs[i].sign_flips > 0) continue;
    const auto col = static_cast<Eigen::Index>(i);
    const Vector delta = c.run.params.col(col + 1) - c.run.params.col(col);
    err += std::abs(c.losses[i + 1] - c.losses[i] - c.run.grads.col(col).dot(delta));
    sq += delta.squaredNorm();
    ++used;
  }
  a.measured["smooth_steps"] = used;
  a.measured["error_sum"] = err;
  a.measured["squared_step_sum"] = sq;
  a.measured["L_H_fit"] = sq > 0.0 ? err / sq : 0.0;
  if (used == 0) a.verdict = Verdict::insufficient_data;
  return a;
}

AuditResult audit_lyapunov(const Context& c, long T0) {
  AuditResult a;
  a.name = "lyapunov";
  a.verdict = Verdict::informational;
  const auto& recs = c.run.records;
  double kappa = 0.0;
  long zero_step_increases = 0;
  for (auto i = static_cast<std::size_t>(T0); i < recs.size(); ++i) {
    const double rise = c.losses[i + 1] - c.losses[i];
    const double d2 = recs[i].delta_norm2 * recs[i].delta_norm2;
    if (d2 > 0.0) kappa = std::max(kappa, rise / d2);
    else if (rise > 0.0) ++zero_step_increases;
  }
  // V_t = L_t + kappa * sum_{s >= t} ||Delta_s||^2, checked as stored.
  double tail = 0.0;
  std::vector<double> V(recs.size() + 1, 0.0);
  V[recs.size()] = c.losses[recs.size()];
  for (auto i = recs.size(); i-- > static_cast<std::size_t>(T0);) {
    tail += recs[i].delta_norm2 * recs[i].delta_norm2;
    V[i] = c.losses[i] + kappa * tail;
  }
  long violations = 0;
  for (auto i = static_cast<std::size_t>(T0); i < recs.size(); ++i) {
    if (V[i + 1] > V[i] + 1e-12 * (1.0 + std::abs(V[i]))) ++violations;
  }
  a.measured["kappa_fit"] = kappa;
  a.measured["violations"] = violations;
  a.measured["zero_step_increases"] = zero_step_increases;
  a.measured["steps"] = static_cast<long>(recs.size()) - T0;
  if (static_cast<long>(recs.size()) <= T0) a.verdict = Verdict::insufficient_data;
  return a;
}

}  // namespace

AuditOutcome run_audits(const RunData& run, double L_ref) {
  const auto& cfg = run.config;
  const auto& dims = cfg.net.layer_dims;
  if (run.records.empty()) throw InsufficientDataError("run_audits: empty trace");
  const auto T = static_cast<long>(run.records.size());
  if (run.params.cols() != T + 1 || run.grads.cols() != T) throw ShapeError("trajectory and trace lengths differ");

  Context c{run, T, static_cast<long>(hidden_count(dims)), T >= 2, {}, {}};
  c.final_params = params_from(dims, run.params.col(T));
  for (const auto& r : run.records) c.losses.push_back(r.loss);
  c.losses.push_back(loss_value(c.final_params, run.data));
  const double final_margin = margin(c.final_params, run.probes);

  Matrix noise = per_example_grads(c.final_params, run.data);
  noise.colwise() -= noise.rowwise().mean();

  AuditOutcome out;
  SummaryOptions so;
  so.d_eff_window = cfg.d_eff_window;
  so.hidden_units = c.N;
  out.summary = summarize(run.records, run.grads, noise, so);
  const TraceSummary& s = out.summary;

  const std::vector<double> vmin_live = live_min_vhat(run);
  std::vector<double> late_all;
  std::vector<double> late_live;
  for (auto i = static_cast<std::size_t>(T / 2); i < run.records.size(); ++i) {
    late_all.push_back(run.records[i].min_vhat);
    late_live.push_back(vmin_live[i]);
  }
  const double lambda_all = median(late_all);
  const double lambda_hat = median(late_live);

  const long D = static_cast<long>(raw_param_count(dims));
  double R_data = 0.0;
  for (Eigen::Index i = 0; i < run.data.inputs.cols(); ++i) R_data = std::max(R_data, run.data.inputs.col(i).norm());

  BoundInputs& in = out.inputs;
  in.N = c.N;
  in.D = D;
  if (s.d_eff_emp > 0.0) in.d_eff = s.d_eff_emp;
  if (final_margin > 0.0 && std::isfinite(final_margin)) in.m = final_margin;
  if (const auto* lp = std::get_if<LogPowerSchedule>(&cfg.optim.schedule)) {
    in.gamma = lp->gamma;
    in.kappa = lp->kappa;
  }
  in.beta1 = cfg.optim.beta1;
  in.beta2 = cfg.optim.beta2;
  if (lambda_hat > 0.0) in.lambda_SE = lambda_hat;
  in.delta_floor = cfg.spectral_delta;
  in.delta_conf = 0.05;
  in.tau = 0.0;
  in.k = s.k_max;
  in.k_star = s.k_star;
  if (s.theta_ang_q99 > 0.0) in.theta_ang = s.theta_ang_q99;
  in.G_max = s.G_max_emp;
  in.G_lip = s.G_max_emp;
  in.R_data = R_data;
  in.B_step = s.B_step;
  in.n_samples = static_cast<long>(run.data.size());
  in.T0 = static_cast<double>(s.T0_emp);
  in.P_path = s.path_len_l1;
  in.holder_alpha = 1.0;
  in.B_grad = run.grads.size() > 0 ? run.grads.cwiseAbs().maxCoeff() : 0.0;
  in.merge_json(cfg.bound_overrides);

  ReportExtras extras;
  extras.horizon = T;
  for (const auto& r : run.records) extras.step_norms.push_back(r.delta_norm2);
  extras.barrier_dist = (run.params.col(T) - run.params.col(0)).norm();
  extras.barrier_gap = std::max(0.0, c.losses.front() - L_ref);
  double alpha_min = std::numeric_limits<double>::infinity();
  for (const auto& r : run.records) alpha_min = std::min(alpha_min, r.alpha);
  extras.alpha_min = alpha_min;
  if (cfg.audits.contains("bounds")) out.bounds = evaluate_bounds(in, extras);

  const auto want = [&](const char* n) { return cfg.audits.contains(n); };
  if (want("L1")) {
    out.audits.push_back(audit_l1(c, s, final_margin));
    out.audits.push_back(audit_stability(c));
  }
  if (want("L2")) out.audits.push_back(audit_l2(c, in, vmin_live, lambda_hat, lambda_all, cfg.spectral_delta));
  if (want("L3")) out.audits.push_back(audit_l3(c, s, D));
  if (want("L4")) out.audits.push_back(audit_l4(c, s));
  if (want("L5")) out.audits.push_back(audit_l5(c, noise));
  if (want("L6")) out.audits.push_back(audit_l6(c, s, cfg.angular_eps));

  ojson kakeya_json = nullptr;
  if (want("L7") || want("kakeya")) {
    AuditResult a;
    a.name = "L7";
    a.threshold["eps"] = 0.1;
    const long from = std::min(s.T0_emp, T - 1);
    const Matrix deltas = run.params.rightCols(T - from) - run.params.middleCols(from, T - from);
    const int target = std::clamp(static_cast<int>(std::lround(std::max(s.d_eff_emp, 1.0))), 1, 16);
    try {
      const Carpet carpet = build_carpet(deltas, target);
      const Coverage cov = directional_coverage(carpet, cfg.kakeya_n_dirs, 0.1);
      a.verdict = Verdict::informational;
      a.measured["covered_fraction"] = cov.covered_fraction;
      a.measured["worst_gap"] = cov.worst_gap;
      a.measured["rank"] = carpet.achieved_rank;
      if (carpet.reduced_rank()) a.notes = "carpet rank below target";

      ojson k;
      k["from_step"] = from;
      k["target_rank"] = carpet.target_rank;
      k["achieved_rank"] = carpet.achieved_rank;
      k["scale"] = carpet.scale;
      k["covered_fraction"] = cov.covered_fraction;
      k["worst_gap"] = cov.worst_gap;
      const int per = std::max(1, static_cast<int>((4000 + carpet.segments.size() - 1) / carpet.segments.size()));
      const Matrix pts = carpet_points(carpet, per);
      const std::vector<double> scales{0.25, 0.125, 0.0625, 0.03125, 0.015625};
      try {
        const auto box = box_counting_dimension(pts, scales);
        k["box_dimension"] = box.dim_estimate;
        k["box_degenerate"] = box.degenerate;
        k["dimension_floor"] = static_cast<double>(carpet.achieved_rank) - 0.5;
      } catch (const Error& e) {
        k["box_dimension"] = nullptr;
        k["box_error"] = e.what();
      }
      const Matrix sub = pts(Eigen::all, Eigen::seq(0, pts.cols() - 1, std::max<Eigen::Index>(1, pts.cols() / 1000)));
      std::vector<std::pair<double, double>> grid;
      ojson counts = ojson::array();
      for (int e = 0; e <= 8; ++e) {
        const double eps = std::ldexp(1.0, -e);
        const long n = covering_number(sub, eps);
        grid.emplace_back(eps * carpet.scale, static_cast<double>(n));
        counts.push_back(ojson::array({eps * carpet.scale, n}));
      }
      k["cover_counts"] = counts;
      const auto dg = dudley_gap(grid, static_cast<long>(run.data.size()), in.G_lip.value_or(1.0) * in.R_data.value_or(1.0),
                                 in.B_step, in.d_eff);
      k["dudley_gap"] = dg.value;
      k["dudley_closed_form"] = dg.closed_form ? ojson(*dg.closed_form) : ojson(nullptr);
      kakeya_json = k;

      std::ostringstream lines;
      write_carpet(lines, carpet);
      ojson arr = ojson::array();
      std::istringstream ls(lines.str());
      for (std::string line; std::getline(ls, line);) arr.push_back(ojson::parse(line));
      out.carpet_lines = arr;
    } catch (const InsufficientDataError& e) {
      a.verdict = Verdict::insufficient_data;
      a.notes = e.what();
    }
    if (want("L7")) out.audits.push_back(a);
  }

  ojson barrier_json = nullptr;
  if (want("barrier")) {
    AuditResult a;
    a.name = "ulb_path";
    std::vector<Vector> waypoints;
    const long stride = std::max(1L, (T + cfg.barrier_waypoints - 1) / cfg.barrier_waypoints);
    for (long i = 0; i < T; i += stride) waypoints.push_back(run.params.col(i));
    waypoints.push_back(run.params.col(T));
    const auto pb = path_barrier(waypoints, network_objective(c.final_params, run.data), cfg.barrier_resolution);
    a.measured["max_loss"] = pb.max_loss;
    a.measured["endpoint_max"] = pb.endpoint_max;
    a.measured["path_length"] = pb.path_length;
    a.measured["grad_max"] = pb.grad_max;
    a.threshold["ulb_bound"] = pb.ulb_bound;
    a.threshold["tolerance"] = pb.tolerance;
    a.verdict = !c.enough ? Verdict::insufficient_data : pb.ulb_holds ? Verdict::pass : Verdict::fail;
    a.notes = "max loss along the recorded path <= endpoint max + grad_max * path length; grad_max is the "
              "largest sampled gradient norm, a local stand-in for the global constant";
    out.audits.push_back(a);

    const auto seg = segment_barrier(params_from(dims, run.params.col(0)), c.final_params, run.data, 64);
    ojson b;
    b["waypoints"] = static_cast<long>(waypoints.size());
    b["path_max_loss"] = pb.max_loss;
    b["path_length"] = pb.path_length;
    b["segment_max_loss"] = seg.max_loss;
    b["segment_excess"] = seg.excess();
    b["segment_height"] = seg.height(L_ref);
    // Minimizers from other initial seeds on the same task.
    ojson others = ojson::array();
    for (const std::uint64_t seed : cfg.barrier_extra_seeds) {
      ExperimentConfig other = cfg;
      other.net.seed = seed;
      const RunData o = train(other);
      const Params theta = params_from(dims, o.params.col(o.params.cols() - 1));
      const double loss = loss_value(theta, run.data);
      const auto sb = segment_barrier(c.final_params, theta, run.data, cfg.barrier_resolution * 16);
      ojson e;
      e["net_seed"] = seed;
      e["final_loss"] = loss;
      e["loss_difference"] = std::abs(loss - c.losses.back());
      e["segment_max_loss"] = sb.max_loss;
      e["segment_excess"] = sb.excess();
      others.push_back(e);
    }
    b["equal_minimum"] = others;
    barrier_json = b;
  }

  if (want("bounds")) {
    out.audits.push_back(audit_affine(c));
    out.audits.push_back(audit_lyapunov(c, std::min(s.T0_emp, T)));

    AuditResult a;
    a.name = "phase_two";
    a.verdict = Verdict::informational;
    const auto fit = fit_contraction(c.losses, L_ref, s.T0_emp);
    a.measured["points"] = fit.points;
    a.measured["fitted_factor"] = fit.points >= 2 ? ojson(fit.factor) : ojson(nullptr);
    auto rho_at = [&](std::optional<double> T0) -> ojson {
      if (!T0) return nullptr;
      BoundInputs x = in;
      x.T0 = *T0;
      try {
        return rho_rate(x).rho;
      } catch (const DomainError&) {
        return nullptr;
      }
    };
    a.threshold["rho_empirical_T0"] = rho_at(static_cast<double>(s.T0_emp));
    const BoundRow* t0row = out.bounds.find("T0_cutoff");
    a.threshold["rho_theoretical_T0"] = rho_at(t0row ? t0row->value : std::nullopt);
    if (fit.points < 2) a.verdict = Verdict::insufficient_data;
    out.audits.push_back(a);
  }

  ojson& r = out.report;
  r["run_name"] = cfg.run_name;
  r["task_key"] = task_key(cfg);
  r["L_star_ref"] = L_ref;
  ojson cfg_lines = ojson::array();
  std::istringstream cs(to_text(cfg));
  for (std::string line; std::getline(cs, line);) {
    if (line.rfind("report_dir", 0) != 0) cfg_lines.push_back(line);
  }
  r["config"] = cfg_lines;
  ojson fin;
  fin["initial_loss"] = c.losses.front();
  fin["final_loss"] = c.losses.back();
  fin["final_margin"] = final_margin;
  fin["lambda_SE_hat"] = lambda_hat;
  r["final"] = fin;
  r["summary"] = to_json(s);
  r["bound_inputs"] = in.to_json();
  r["bounds"] = to_json(out.bounds);
  ojson audits = ojson::array();
  for (const auto& a : out.audits) audits.push_back(to_json(a));
  r["audits"] = audits;
  r["kakeya"] = kakeya_json;
  r["barrier"] = barrier_json;
  return out;
}

std::string task_key(const ExperimentConfig& c) {
  std::string dims;
  for (std::size_t i = 0; i < c.net.layer_dims.size(); ++i) dims += (i ? "-" : "") + std::to_string(c.net.layer_dims[i]);
  return dataset_kind_name(c.dataset.kind) + "/seed" + std::to_string(c.dataset.seed) + "/n" +
         std::to_string(c.dataset.n_samples) + "/noise" + format_double(c.dataset.noise) + "/" + dims;
}

void write_vectors(std::ostream& os, const Matrix& params, const Matrix& grads) {
  static_assert(std::endian::native == std::endian::little, "vectors.bin is little-endian");
  if (params.rows() != grads.rows() || params.cols() != grads.cols() + 1) throw ShapeError("write_vectors: shapes");
  os.write("RLVEC1\0\0", 8);
  const std::uint64_t D = static_cast<std::uint64_t>(params.rows());
  const std::uint64_t T = static_cast<std::uint64_t>(grads.cols());
  os.write(reinterpret_cast<const char*>(&D), 8);
  os.write(reinterpret_cast<const char*>(&T), 8);
  // Column-major storage puts each vector contiguously.
  os.write(reinterpret_cast<const char*>(params.data()), static_cast<std::streamsize>(params.size() * 8));
  os.write(reinterpret_cast<const char*>(grads.data()), static_cast<std::streamsize>(grads.size() * 8));
}

void read_vectors(std::istream& is, Matrix& params, Matrix& grads) {
  char magic[8];
  std::uint64_t D = 0;
  std::uint64_t T = 0;
  is.read(magic, 8);
  is.read(reinterpret_cast<char*>(&D), 8);
  is.read(reinterpret_cast<char*>(&T), 8);
  if (!is || std::memcmp(magic, "RLVEC1\0\0", 8) != 0) throw ConfigError("vectors.bin: bad header");
  if (D > (1u << 24) || T > (1u << 26)) throw ConfigError("vectors.bin: implausible sizes");
  params.resize(static_cast<Eigen::Index>(D), static_cast<Eigen::Index>(T + 1));
  grads.resize(static_cast<Eigen::Index>(D), static_cast<Eigen::Index>(T));
  is.read(reinterpret_cast<char*>(params.data()), static_cast<std::streamsize>(params.size() * 8));
  is.read(reinterpret_cast<char*>(grads.data()), static_cast<std::streamsize>(grads.size() * 8));
  if (!is) throw ConfigError("vectors.bin: truncated");
}

ojson checkpoint_json(const Params& p) {
  ojson j;
  j["layer_dims"] = p.dims();
  ojson v = ojson::array();
  for (double x : p.flat()) v.push_back(x);
  j["params"] = v;
  return j;
}

Params checkpoint_from_json(const nlohmann::json& j) {
  if (!j.contains("layer_dims") || !j.contains("params")) throw ConfigError("checkpoint needs layer_dims and params");
  const auto dims = j["layer_dims"].get<std::vector<int>>();
  NetConfig nc{dims, 1.0, 0};
  try {
    nc.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  const auto values = j["params"].get<std::vector<double>>();
  Params p(dims);
  if (values.size() != p.size()) throw ShapeError("checkpoint has " + std::to_string(values.size()) + " values, expected " +
                                                  std::to_string(p.size()));
  std::copy(values.begin(), values.end(), p.flat().begin());
  return p;
}

Params load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checkpoint " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

namespace {

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << text;
}

double best_loss(const RunData& run) {
  double best = loss_value(params_from(run.config.net.layer_dims, run.params.col(run.params.cols() - 1)), run.data);
  for (const auto& r : run.records) best = std::min(best, r.loss);
  return best;
}

std::optional<double> stored_reference(const fs::path& file, const std::string& key) {
  std::ifstream in(file);
  if (!in) return std::nullopt;
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
  if (!j.is_object() || !j.contains(key) || !j[key].is_number()) return std::nullopt;
  return j[key].get<double>();
}

void write_outputs(const fs::path& dir, const RunResult& res) {
  std::ostringstream trace;
  write_trace(trace, res.run.records);
  write_text(dir / "trace.jsonl", trace.str());
  {
    std::ofstream vec(dir / "vectors.bin", std::ios::binary);
    write_vectors(vec, res.run.params, res.run.grads);
  }
  const auto& dims = res.run.config.net.layer_dims;
  write_text(dir / "init.json", checkpoint_json(params_from(dims, res.run.params.col(0))).dump() + "\n");
  write_text(dir / "final.json",
             checkpoint_json(params_from(dims, res.run.params.col(res.run.params.cols() - 1))).dump() + "\n");
  write_text(dir / "summary.json", to_json(res.outcome.summary).dump(2) + "\n");
  write_text(dir / "report.json", res.outcome.report.dump(2) + "\n");
  if (res.outcome.carpet_lines) {
    std::string lines;
    for (const auto& l : *res.outcome.carpet_lines) lines += l.dump() + "\n";
    write_text(dir / "carpet.jsonl", lines);
  }
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const fs::path root = config.effective_report_dir();
  const fs::path dir = root / config.run_name;
  fs::create_directories(dir);
  write_text(dir / "config.cfg", to_text(config));

  RunResult res;
  res.run_dir = dir.string();
  std::vector<StepRecord> partial;
  try {
    res.run = train(config, &partial);
  } catch (const NumericError&) {
    std::ostringstream trace;
    write_trace(trace, partial);
    write_text(dir / "trace.jsonl", trace.str());
    throw;
  }

  const std::string key = task_key(config);
  const fs::path ref_file = root / "lstar_ref.json";
  double L_ref = best_loss(res.run);
  if (const auto stored = stored_reference(ref_file, key)) L_ref = std::min(L_ref, *stored);
  nlohmann::json table = nlohmann::json::object();
  if (std::ifstream in(ref_file); in) {
    try {
      in >> table;
    } catch (const nlohmann::json::exception&) {
      table = nlohmann::json::object();
    }
    if (!table.is_object()) table = nlohmann::json::object();
  }
  table[key] = L_ref;
  write_text(ref_file, table.dump(2) + "\n");

  res.outcome = run_audits(res.run, L_ref);
  write_outputs(dir, res);
  return res;
}

RunResult audit_run_dir(const std::string& run_dir) {
  fs::path dir = run_dir;
  if (dir.filename().empty()) dir = dir.parent_path();
  RunResult res;
  res.run_dir = run_dir;
  RunData& run = res.run;
  run.config = load_config((dir / "config.cfg").string());
  run.data = generate_dataset(run.config.dataset, run.config.net);
  run.probes = reference_probes(run.config, run.data);
  {
    std::ifstream in(dir / "trace.jsonl");
    if (!in) throw ConfigError("missing trace.jsonl in " + run_dir);
    run.records = read_trace(in);
  }
  {
    std::ifstream in(dir / "vectors.bin", std::ios::binary);
    if (!in) throw ConfigError("missing vectors.bin in " + run_dir);
    read_vectors(in, run.params, run.grads);
  }
  double L_ref = best_loss(run);
  const fs::path parent = dir.has_parent_path() ? dir.parent_path() : fs::path(".");
  if (const auto stored = stored_reference(parent / "lstar_ref.json", task_key(run.config))) {
    L_ref = std::min(L_ref, *stored);
  }
  res.outcome = run_audits(run, L_ref);
  return res;
}

}  // namespace relulab
