// One PASS/FAIL line per acceptance criterion. Exit status 1 if any fails.

#include <boost/multiprecision/cpp_dec_float.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "relulab/arrangement.hpp"
#include "relulab/barrier.hpp"
#include "relulab/bounds.hpp"
#include "relulab/errors.hpp"
#include "relulab/experiment.hpp"
#include "relulab/kakeya.hpp"
#include "relulab/optim.hpp"
#include "relulab/trace.hpp"

using namespace relulab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, double limit_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (limit_s > 0.0 && secs > limit_s) {
    o.pass = false;
    o.detail += " [over time limit]";
  }
  if (!o.pass) ++failures;
  std::printf("%s %2d %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("relulab_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ExperimentConfig reference_config(const fs::path& report_dir) {
  ExperimentConfig c = load_config("configs/reference.cfg");
  c.report_dir = report_dir.string();
  return c;
}

Outcome gradient_check() {
  Rng rng(2024);
  double worst = 0.0;
  int pairs = 0;
  int draws = 0;
  while (pairs < 100) {
    ++draws;
    const NetConfig nc{{3, 6, 5, 2}, 1.0, rng.next_u64()};
    const Params p = init_params(nc);
    const auto kind = pairs % 2 ? LossKind::cross_entropy_with_logits : LossKind::squared_error;
    const Dataset d = oracle::random_dataset(3, 2, 1, rng.next_u64(), kind);
    if (!(oracle::min_abs_preact(p, d.inputs) > 1e-3)) continue;
    const Vector g = loss_and_grad(p, d).grad.vec();
    const Vector fd = oracle::finite_difference_grad(p, d, 1e-6);
    const double scale = std::max({g.norm(), fd.norm(), 1e-300});
    worst = std::max(worst, (g - fd).norm() / scale);
    ++pairs;
  }
  return {worst < 1e-5, fmt("100 pairs (%d draws), max relative error %.3g", draws, worst)};
}

Outcome adam_identity() {
  Rng rng(7);
  double worst_first = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Params p = init_params(NetConfig{{3, 4, 2}, 1.0, rng.next_u64()});
    Params g = Params::zeros_like(p);
    for (double& x : g.flat()) x = rng.normal();
    OptimConfig oc;
    oc.epsilon = 0.0;
    oc.beta1 = rng.uniform(0.0, 0.99);
    oc.beta2 = rng.uniform(0.0, 0.999);
    const AdamResult r = adam_step(p, g, OptimState::zeros_like(p), oc);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double expect = -r.alpha * (g.flat()[i] > 0 ? 1.0 : -1.0);
      worst_first = std::max(worst_first, std::abs(r.delta.flat()[i] - expect));
    }
  }

  Params p = init_params(NetConfig{{3, 4, 2}, 1.0, 3});
  Params g = Params::zeros_like(p);
  for (double& x : g.flat()) x = rng.normal();
  OptimConfig oc;
  OptimState st = OptimState::zeros_like(p);
  Params delta = Params::zeros_like(p);
  double alpha = 0.0;
  for (int t = 0; t < 500; ++t) alpha = adam_step_inplace(p, g, st, oc, &delta);
  double worst_sign = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double dir = -delta.flat()[i] / alpha;
    worst_sign = std::max(worst_sign, std::abs(dir - (g.flat()[i] > 0 ? 1.0 : -1.0)));
  }
  return {worst_first <= 1e-12 && worst_sign <= 1e-6,
          fmt("first-step max deviation %.3g, sign deviation at t=500 %.3g", worst_first, worst_sign)};
}

Outcome zaslavsky_oracle() {
  long checked = 0;
  long mismatched = 0;
  for (int d = 1; d <= 3; ++d) {
    for (int n = 1; n <= 8; ++n) {
      for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(100000 * d + 1000 * n + seed);
        Arrangement a;
        a.dim = d;
        for (int i = 0; i < n; ++i) {
          Hyperplane h;
          for (int k = 0; k < d; ++k) h.normal.push_back(rng.normal());
          h.offset = rng.uniform(-1.0, 1.0);
          a.planes.push_back(h);
        }
        const auto v = verify_zaslavsky(a);
        ++checked;
        if (v.exact > v.bound || v.exact != v.bound || BigInt(v.bound) != zaslavsky(n, d)) ++mismatched;
      }
    }
  }
  Arrangement conc;
  conc.dim = 2;
  conc.planes = {{{1.0, 0.0}, 0.0}, {{0.0, 1.0}, 0.0}, {{1.0, 1.0}, 0.0}};
  const auto c = verify_zaslavsky(conc);
  return {mismatched == 0 && c.exact == 6 && c.bound == 7 && !c.tight,
          fmt("%ld generic arrangements, %ld mismatches; concurrent lines %ld < %ld", checked, mismatched, c.exact,
              c.bound)};
}

Outcome tope_diameter() {
  long cases = 0;
  long bad = 0;
  for (int k = 1; k <= 4; ++k) {
    for (int n = 2 * k; n <= 10; ++n) {
      const auto s = sparse_tope_diameter(n, k);
      ++cases;
      if (s.exactly_k != 2 * k || s.overall != 2 * k) ++bad;
    }
  }
  return {bad == 0, fmt("%ld (N, k) pairs, %ld with diameter != 2k", cases, bad)};
}

struct ReferenceRun {
  RunResult result;
  fs::path dir;
};

Outcome mask_freeze(const ReferenceRun& ref) {
  const auto& run = ref.result.run;
  const auto& s = ref.result.outcome.summary;
  const long T = static_cast<long>(run.records.size());
  long late_flips = 0;
  for (long i = s.T0_emp; i < T; ++i) late_flips += run.records[static_cast<std::size_t>(i)].sign_flips;
  BoundInputs in;
  in.N = static_cast<long>(hidden_count(run.config.net.layer_dims));
  in.T0 = static_cast<double>(s.T0_emp);
  in.k = s.k_max;
  in.k_star = s.k_star;
  const double bound = crossing_l4(in);
  const bool ok = s.T0_emp < T && late_flips == 0 && static_cast<double>(s.crossings) <= bound;
  return {ok, fmt("T0_emp %ld of %ld steps, flips after T0 %ld, crossings %ld <= %.0f (N %ld, k %ld, k* %ld)",
                  s.T0_emp, T, late_flips, s.crossings, bound, *in.N, s.k_max, s.k_star)};
}

Outcome stability_radius(const ReferenceRun& ref) {
  long inside = 0;
  long violations = 0;
  for (const auto& r : ref.result.run.records) {
    if (!(r.lipschitz > 0.0)) continue;
    if (r.delta_norm2 < r.margin / (2.0 * r.lipschitz)) {
      ++inside;
      if (r.sign_flips != 0) ++violations;
    }
  }
  return {violations == 0 && inside > 0, fmt("%ld steps inside the radius, %ld violations", inside, violations)};
}

Outcome spectral_floor() {
  const std::vector<double> lambdas{0.25, 0.25, 0.5, 0.5};
  const double half_width = std::sqrt(3.0);
  BoundInputs in;
  in.B_grad = half_width * std::sqrt(0.5);
  in.tau = 0.0;
  in.beta2 = 0.99;
  in.delta_floor = 0.5;
  in.lambda_SE = 0.25;
  in.N = static_cast<long>(lambdas.size());
  double sum = 0.0, sq = 0.0;
  for (double l : lambdas) {
    sum += l;
    sq += l * l;
  }
  in.d_eff = sum * sum / sq;
  const long T1 = static_cast<long>(std::ceil(t1_spectral(in)));
  const long window = 20000;

  OptimConfig oc;
  oc.beta2 = 0.99;
  int good = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    Params p = init_params(NetConfig{{3, 1}, 1.0, 0});
    Params g = Params::zeros_like(p);
    OptimState st = OptimState::zeros_like(p);
    double floor_after = INFINITY;
    for (long t = 1; t <= T1 + window; ++t) {
      auto gf = g.flat();
      for (std::size_t j = 0; j < gf.size(); ++j) gf[j] = std::sqrt(lambdas[j]) * rng.uniform(-half_width, half_width);
      adam_step_inplace(p, g, st, oc);
      if (t >= T1) {
        const double c2 = 1.0 - std::pow(oc.beta2, static_cast<double>(t));
        for (double v : st.v.flat()) floor_after = std::min(floor_after, v / c2);
      }
    }
    if (floor_after >= 0.125) ++good;
  }
  return {good >= 95, fmt("T1 = %ld, %d of 100 seeds keep min v_hat >= 0.125 over %ld steps after T1", T1, good, window)};
}

Outcome d_eff_recovery() {
  Rng rng(99);
  Matrix raw(50, 3);
  for (Eigen::Index i = 0; i < raw.size(); ++i) raw.data()[i] = rng.normal();
  const Matrix U = Eigen::HouseholderQR<Matrix>(raw).householderQ() * Matrix::Identity(50, 3);
  double lo = INFINITY, hi = -INFINITY;
  for (int trial = 0; trial < 10; ++trial) {
    Matrix z(3, 512);
    for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = rng.normal();
    const double e = effective_dimension(U * z, 512).value;
    lo = std::min(lo, e);
    hi = std::max(hi, e);
  }
  Matrix wide(50, 8);
  for (Eigen::Index i = 0; i < wide.size(); ++i) wide.data()[i] = rng.normal();
  const Matrix Q = 3.7 * (Eigen::HouseholderQR<Matrix>(wide).householderQ() * Matrix::Identity(50, 8));
  const double equal = effective_dimension(Q, 8).value;
  return {lo >= 2.5 && hi <= 3.5 && std::abs(equal - 8.0) < 1e-9,
          fmt("rank-3 estimates in [%.4f, %.4f]; equal spectrum gives %.12f for window 8", lo, hi, equal)};
}

Outcome barrier_audits(const ReferenceRun& ref) {
  const Objective well = [](const Vector& v) {
    const double s = v.squaredNorm();
    return (s - 1.0) * (s - 1.0);
  };
  const double excess = segment_barrier(Vector::Constant(1, -1.0), Vector::Constant(1, 1.0), well, 256).excess();
  Rng rng(5);
  double worst_quad = 0.0;
  const Objective quad = [](const Vector& v) { return 0.5 * v.squaredNorm(); };
  for (int i = 0; i < 20; ++i) {
    Vector a(8), b(8);
    for (int k = 0; k < 8; ++k) {
      a(k) = rng.normal();
      b(k) = rng.normal();
    }
    worst_quad = std::max(worst_quad, std::abs(segment_barrier(a, b, quad, 256).excess()));
  }
  const auto& run = ref.result.run;
  std::vector<Vector> waypoints;
  for (Eigen::Index c = 0; c < run.params.cols(); ++c) waypoints.push_back(run.params.col(c));
  Params like = init_params(run.config.net);
  Dataset data = run.data;
  const PathBarrier pb = path_barrier(waypoints, network_objective(like, data), 8);
  return {std::abs(excess - 1.0) <= 1e-3 && worst_quad <= 1e-12 && pb.ulb_holds,
          fmt("double-well excess %.6f, quadratic excess %.3g, ULB on %zu segments: max %.6g <= %.6g + tol %.3g",
              excess, worst_quad, pb.per_segment.size(), pb.max_loss, pb.ulb_bound, pb.tolerance)};
}

Outcome box_counting() {
  std::vector<double> scales;
  for (int k = 3; k <= 7; ++k) scales.push_back(std::ldexp(1.0, -k));
  Matrix seg(2, 10000);
  for (int i = 0; i < 10000; ++i) seg.col(i) << 0.1 + 0.8 * i / 9999.0, 0.37;
  Matrix sq(2, 10000);
  for (int i = 0; i < 100; ++i)
    for (int j = 0; j < 100; ++j) sq.col(100 * i + j) << (i + 0.5) / 100.0, (j + 0.5) / 100.0;
  const double ds = box_counting_dimension(seg, scales).dim_estimate;
  const double dq = box_counting_dimension(sq, scales).dim_estimate;
  double worst_rot = 0.0;
  for (double th : {0.3, 0.7, 1.1}) {
    Eigen::Matrix2d r;
    r << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
    worst_rot = std::max(worst_rot, std::abs(box_counting_dimension(r * seg, scales).dim_estimate - ds));
    worst_rot = std::max(worst_rot, std::abs(box_counting_dimension(r * sq, scales).dim_estimate - dq));
  }
  return {ds >= 0.85 && ds <= 1.15 && dq >= 1.85 && dq <= 2.15 && worst_rot <= 0.05,
          fmt("segment %.4f, square %.4f, max rotation shift %.4f", ds, dq, worst_rot)};
}

Outcome formula_regression() {
  using Dec = boost::multiprecision::cpp_dec_float_50;
  BoundInputs g;
  g.G_lip = g.R_data = g.B_step = 1.0;
  g.d_eff = 4.0;
  g.delta_conf = 0.05;
  g.n_samples = 1000;
  const double gap = gen_gap(g);
  const double oracle_gap = (24 * boost::multiprecision::sqrt((Dec(4) + boost::multiprecision::log(Dec(40))) / 1000))
                                .convert_to<double>();

  BoundInputs r;
  r.gamma = r.mu = 1.0;
  r.T0 = std::numbers::e;
  r.kappa = 0.0;
  const double rho = rho_rate(r).rho;

  BoundInputs t;
  t.C_conv = t.mu = t.gamma = t.C_q = 1.0;
  t.m = 2.0;
  t.kappa = 1.0;
  const auto cut = t0_cutoff(t);

  BoundInputs l4;
  l4.N = 10;
  l4.T0 = 3;
  l4.k = 2;
  l4.k_star = 9;
  const double c4 = crossing_l4(l4);

  const bool ok = std::abs(gap - 2.1045) <= 1e-4 && std::abs(gap - oracle_gap) <= 1e-12 &&
                  std::abs(rho - (1.0 - 2.0 / std::numbers::e)) <= 1e-12 && cut.T_dist == 2.0 && cut.T_step == 1.0 &&
                  cut.T0 == 2.0 && c4 == 35.0;
  return {ok, fmt("gen_gap %.10f (oracle %.10f), rho %.15f, t0_cutoff (%g, %g, %g), L4 %g", gap, oracle_gap, rho,
                  cut.T_dist, cut.T_step, cut.T0, c4)};
}

Outcome dudley_quadrature() {
  std::vector<std::pair<double, double>> grid;
  for (int k = 1; k <= 2000; ++k) grid.emplace_back(k / 2000.0, std::sqrt(2000.0 / k));
  for (int j = 12; j <= 40; ++j) grid.emplace_back(std::ldexp(1.0, -j), std::sqrt(std::ldexp(1.0, j)));
  const double trap = dudley_gap(grid, 1, 1.0).value;
  const double fine =
      oracle::midpoint([](double e) { return 12.0 * std::sqrt(0.5 * std::log(1.0 / e)); }, 0.0, 1.0, 4000000);
  const double closed = 12.0 * std::sqrt(std::numbers::pi) / (2.0 * std::sqrt(2.0));
  const double rel = std::abs(trap - fine) / fine;
  return {rel <= 0.01, fmt("trapezoid %.6f, fine-grid oracle %.6f (closed form %.6f), relative gap %.3g", trap, fine,
                           closed, rel)};
}

Outcome determinism(const ReferenceRun& ref) {
  const fs::path other = fresh_dir("determinism");
  const RunResult again = run_experiment(reference_config(other));
  const bool same_trace =
      slurp(fs::path(ref.result.run_dir) / "trace.jsonl") == slurp(fs::path(again.run_dir) / "trace.jsonl");
  const bool same_report =
      slurp(fs::path(ref.result.run_dir) / "report.json") == slurp(fs::path(again.run_dir) / "report.json");
  return {same_trace && same_report, fmt("trace %s, report %s", same_trace ? "identical" : "differs",
                                         same_report ? "identical" : "differs")};
}

}  // namespace

int main() {
  ::unsetenv("RELULAB_REPORT_DIR");
  report(1, "gradient vs finite differences", 10.0, gradient_check);
  report(2, "Adam first step and sign convergence", 0.0, adam_identity);
  report(3, "region counts vs binomial bound", 60.0, zaslavsky_oracle);
  report(4, "sparse tope diameter", 0.0, tope_diameter);

  ReferenceRun ref;
  bool have_ref = false;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    ref.dir = fresh_dir("reference");
    ref.result = run_experiment(reference_config(ref.dir));
    have_ref = true;
  } catch (const std::exception& e) {
    std::printf("reference run failed: %s\n", e.what());
  }
  const double ref_secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  auto with_ref = [&](auto fn) {
    return [&, fn]() -> Outcome {
      if (!have_ref) return {false, "reference run unavailable"};
      return fn(ref);
    };
  };
  report(5, "mask freeze on the reference run", 120.0, [&]() -> Outcome {
    if (!have_ref) return {false, "reference run unavailable"};
    Outcome o = mask_freeze(ref);
    o.detail += fmt("; training and audits took %.2f s", ref_secs);
    if (ref_secs > 120.0) o.pass = false;
    return o;
  });
  report(6, "stability radius", 0.0, with_ref(stability_radius));
  report(7, "spectral floor", 0.0, spectral_floor);
  report(8, "effective dimension recovery", 0.0, d_eff_recovery);
  report(9, "barrier audits", 0.0, with_ref(barrier_audits));
  report(10, "box-counting dimension", 30.0, box_counting);
  report(11, "formula regression", 0.0, formula_regression);
  report(12, "Dudley quadrature", 0.0, dudley_quadrature);
  report(13, "end-to-end determinism", 0.0, with_ref(determinism));
  std::printf("%d of 13 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
