#include "relulab/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "relulab/errors.hpp"

namespace relulab {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

struct RealField {
  const char* name;
  std::optional<double> BoundInputs::*member;
};
struct IntField {
  const char* name;
  std::optional<long> BoundInputs::*member;
};

constexpr RealField kRealFields[] = {
    {"d_eff", &BoundInputs::d_eff},       {"mu", &BoundInputs::mu},
    {"L_smooth", &BoundInputs::L_smooth}, {"m", &BoundInputs::m},
    {"gamma", &BoundInputs::gamma},       {"kappa", &BoundInputs::kappa},
    {"C_conv", &BoundInputs::C_conv},     {"C_q", &BoundInputs::C_q},
    {"tau", &BoundInputs::tau},           {"delta_conf", &BoundInputs::delta_conf},
    {"delta_floor", &BoundInputs::delta_floor},
    {"lambda_SE", &BoundInputs::lambda_SE}, {"beta1", &BoundInputs::beta1},
    {"beta2", &BoundInputs::beta2},       {"theta_ang", &BoundInputs::theta_ang},
    {"c_ang", &BoundInputs::c_ang},       {"G_max", &BoundInputs::G_max},
    {"D1", &BoundInputs::D1},             {"D2", &BoundInputs::D2},
    {"G_lip", &BoundInputs::G_lip},       {"R_data", &BoundInputs::R_data},
    {"B_step", &BoundInputs::B_step},     {"T0", &BoundInputs::T0},
    {"P_path", &BoundInputs::P_path},     {"holder_alpha", &BoundInputs::holder_alpha},
    {"B_grad", &BoundInputs::B_grad},     {"B_weight", &BoundInputs::B_weight},
    {"C_d", &BoundInputs::C_d},
};

constexpr IntField kIntFields[] = {
    {"N", &BoundInputs::N},
    {"D", &BoundInputs::D},
    {"k", &BoundInputs::k},
    {"k_star", &BoundInputs::k_star},
    {"n_samples", &BoundInputs::n_samples},
};

double need(const std::optional<double>& v, const char* field) {
  if (!v) throw DomainError(field, "missing");
  if (!std::isfinite(*v)) throw DomainError(field, "not finite");
  return *v;
}

long need(const std::optional<long>& v, const char* field) {
  if (!v) throw DomainError(field, "missing");
  return *v;
}

double positive(const std::optional<double>& v, const char* field) {
  const double x = need(v, field);
  if (!(x > 0.0)) throw DomainError(field, "must be > 0");
  return x;
}

double nonneg(const std::optional<double>& v, const char* field) {
  const double x = need(v, field);
  if (!(x >= 0.0)) throw DomainError(field, "must be >= 0");
  return x;
}

double to_double(const BigInt& v) { return v.convert_to<double>(); }

}  // namespace

void BoundInputs::merge_json(const json& j) {
  if (!j.is_object()) throw ConfigError("bound inputs must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const auto& f : kRealFields) {
      if (key == f.name) {
        this->*f.member = value.is_null() ? std::nullopt : std::optional<double>(value.get<double>());
        known = true;
      }
    }
    for (const auto& f : kIntFields) {
      if (key == f.name) {
        this->*f.member = value.is_null() ? std::nullopt : std::optional<long>(value.get<long>());
        known = true;
      }
    }
    if (key == "eps_adv") {
      eps_adv = value.get<std::vector<double>>();
      known = true;
    }
    if (!known) throw ConfigError("unknown bound input '" + key + "'");
  }
}

ojson BoundInputs::to_json() const {
  ojson j = ojson::object();
  for (const auto& f : kIntFields) {
    if (this->*f.member) j[f.name] = *(this->*f.member);
  }
  for (const auto& f : kRealFields) {
    if (this->*f.member) j[f.name] = *(this->*f.member);
  }
  if (!eps_adv.empty()) j["eps_adv"] = eps_adv;
  return j;
}

BigInt zaslavsky(long N, long d) {
  if (N < 0) throw DomainError("N", "must be >= 0");
  if (d < 0) throw DomainError("d", "must be >= 0");
  BigInt sum = 0;
  BigInt term = 1;  // C(N, i)
  const long top = std::min(N, d);
  for (long i = 0; i <= top; ++i) {
    sum += term;
    term = term * (N - i) / (i + 1);
  }
  return sum;
}

T0Cutoff t0_cutoff(const BoundInputs& in) {
  const double m = positive(in.m, "m");
  const double kappa = positive(in.kappa, "kappa");
  const double C = nonneg(in.C_conv, "C_conv");
  const double mu = positive(in.mu, "mu");
  const double gamma = positive(in.gamma, "gamma");
  const double Cq = nonneg(in.C_q, "C_q");
  const double k = std::min(1.0, kappa);
  T0Cutoff r;
  r.T_dist = std::pow(2.0 * C / mu, 1.0 / k) * std::pow(2.0 / m, 2.0 / k);
  r.T_step = std::pow(2.0 * gamma * Cq / m, 1.0 / (1.0 + kappa));
  r.T0 = std::max(r.T_dist, r.T_step);
  return r;
}

double t1_spectral(const BoundInputs& in) {
  const double B = nonneg(in.B_grad, "B_grad");
  const double tau = nonneg(in.tau, "tau");
  const double beta2 = need(in.beta2, "beta2");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw DomainError("beta2", "must lie in [0,1)");
  const double delta = positive(in.delta_floor, "delta_floor");
  const double lambda = positive(in.lambda_SE, "lambda_SE");
  const double d_eff = positive(in.d_eff, "d_eff");
  const long N = need(in.N, "N");
  if (N < 1) throw DomainError("N", "must be >= 1");
  const double gap = 1.0 - beta2;
  const double log_term = std::log(2.0 * d_eff * static_cast<double>(N));
  return 2.0 * B * B * (1.0 + 2.0 * tau * gap) * log_term /
         (gap * gap * delta * delta * lambda * lambda);
}

double adam_rate_constant(const BoundInputs& in) {
  const double L = nonneg(in.L_smooth, "L_smooth");
  const double gamma = positive(in.gamma, "gamma");
  const double beta1 = need(in.beta1, "beta1");
  const double beta2 = need(in.beta2, "beta2");
  if (!(beta2 < 1.0)) throw DomainError("beta2", "must be < 1");
  const double mu = positive(in.mu, "mu");
  const double lambda = positive(in.lambda_SE, "lambda_SE");
  return L * gamma * gamma * (1.0 - beta1) * (1.0 - beta1) / (mu * (1.0 - beta2) * lambda);
}

double crossing_l4(const BoundInputs& in) {
  const long N = need(in.N, "N");
  const double T0 = nonneg(in.T0, "T0");
  const long k = need(in.k, "k");
  const long k_star = need(in.k_star, "k_star");
  if (N < 0) throw DomainError("N", "must be >= 0");
  if (k_star > N) throw DomainError("k_star", "exceeds N");
  if (k < 0 || k_star < 0) throw DomainError("k", "must be >= 0");
  return static_cast<double>(N) * T0 + static_cast<double>(N - k_star) + 2.0 * static_cast<double>(k);
}

double crossing_l6(const BoundInputs& in) {
  const double theta = positive(in.theta_ang, "theta_ang");
  if (theta > std::numbers::pi) throw DomainError("theta_ang", "must lie in (0, pi]");
  const double c = positive(in.c_ang, "c_ang");
  const double d_eff = need(in.d_eff, "d_eff");
  if (!(d_eff >= 1.0)) throw DomainError("d_eff", "must be >= 1");
  const double turns = std::ceil(std::numbers::pi / theta);
  return turns * (c + std::sqrt(2.0 * c * std::log(d_eff * d_eff))) * d_eff;
}

std::vector<CrossingRow> crossing_bounds_table(const BoundInputs& in) {
  if (in.N && in.k_star && *in.k_star > *in.N) throw DomainError("k_star", "exceeds N");
  std::vector<CrossingRow> rows;
  auto add = [&rows](std::string name, bool asymptotic, auto&& fn) {
    CrossingRow row{std::move(name), std::nullopt, {}, asymptotic, {}};
    try {
      fn(row);
    } catch (const DomainError& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  };
  add("L0_zaslavsky", false, [&](CrossingRow& r) {
    const BigInt z = zaslavsky(need(in.N, "N"), need(in.D, "D"));
    r.exact = z.str();
    r.value = to_double(z);
  });
  add("L1_margin_cutoff", false, [&](CrossingRow& r) {
    r.value = static_cast<double>(need(in.N, "N")) * nonneg(in.T0, "T0");
  });
  add("L2_l1_path_length", false, [&](CrossingRow& r) { r.value = nonneg(in.P_path, "P_path"); });
  add("L3_low_rank", false, [&](CrossingRow& r) {
    const double d_eff = nonneg(in.d_eff, "d_eff");
    const BigInt z = zaslavsky(need(in.N, "N"), static_cast<long>(std::ceil(d_eff)));
    r.exact = z.str();
    r.value = to_double(z);
  });
  add("L4_sparse_tope", false, [&](CrossingRow& r) { r.value = crossing_l4(in); });
  add("L5_subgaussian", true, [&](CrossingRow& r) {
    const long N = need(in.N, "N");
    if (N < 1) throw DomainError("N", "must be >= 1");
    r.value = nonneg(in.d_eff, "d_eff") * std::log(static_cast<double>(N));
  });
  add("L6_angular", false, [&](CrossingRow& r) { r.value = crossing_l6(in); });
  return rows;
}

double gradient_rate(const BoundInputs& in, long T) {
  if (T < 1) throw DomainError("T", "must be >= 1");
  const double D1 = need(in.D1, "D1");
  const double D2 = need(in.D2, "D2");
  const double kappa = positive(in.kappa, "kappa");
  const double cross = D2 == 0.0 ? 0.0 : crossing_l6(in);
  return (D1 + D2 * cross) / std::pow(static_cast<double>(T), std::min(1.0, kappa));
}

RhoRate rho_rate(const BoundInputs& in) {
  const double T0 = need(in.T0, "T0");
  if (!(T0 >= 2.0)) throw DomainError("T0", "must be >= 2 so that ln T0 > 0");
  const double gamma = nonneg(in.gamma, "gamma");
  const double mu = nonneg(in.mu, "mu");
  const double kappa = nonneg(in.kappa, "kappa");
  RhoRate r;
  r.rho = 1.0 - 2.0 * gamma * mu / (T0 * std::pow(std::log(T0), 1.0 + kappa));
  r.contractive = r.rho > 0.0 && r.rho < 1.0;
  return r;
}

double gen_gap(const BoundInputs& in) {
  const long n = need(in.n_samples, "n_samples");
  if (n < 1) throw DomainError("n_samples", "must be >= 1");
  const double delta = need(in.delta_conf, "delta_conf");
  if (!(delta > 0.0 && delta <= 2.0)) throw DomainError("delta_conf", "must lie in (0, 2]");
  const double G = nonneg(in.G_lip, "G_lip");
  const double R = nonneg(in.R_data, "R_data");
  const double B = nonneg(in.B_step, "B_step");
  const double d_eff = nonneg(in.d_eff, "d_eff");
  return 24.0 * G * R * B * std::sqrt((d_eff + std::log(2.0 / delta)) / static_cast<double>(n));
}

double kakeya_cover_bound(double B_step, double eps, double d_eff, double C_d) {
  if (!(eps > 0.0)) throw DomainError("eps", "must be > 0");
  if (!(eps < B_step)) throw DomainError("eps", "must be < B_step");
  if (!std::isfinite(d_eff)) throw DomainError("d_eff", "not finite");
  return C_d * std::pow(B_step / eps, d_eff - 0.5);
}

double step_length_bound(const BoundInputs& in) {
  const double gamma = nonneg(in.gamma, "gamma");
  const double G = nonneg(in.G_max, "G_max");
  const double lambda = positive(in.lambda_SE, "lambda_SE");
  const double T0 = need(in.T0, "T0");
  if (!(T0 >= 2.0)) throw DomainError("T0", "must be >= 2");
  const double kappa = nonneg(in.kappa, "kappa");
  return gamma * G / (std::sqrt(lambda) * T0 * std::pow(std::log(T0), 1.0 + kappa));
}

UlbDeltas ulb_deltas(const BoundInputs& in, const std::vector<double>& step_norms) {
  const double G = nonneg(in.G_lip, "G_lip");
  const double a = in.holder_alpha.value_or(1.0);
  if (!(a > 0.0 && a <= 1.0)) throw DomainError("holder_alpha", "must lie in (0, 1]");
  double path = 0.0;
  double holder = 0.0;
  for (double s : step_norms) {
    if (!(s >= 0.0)) throw DomainError("step_norms", "must be >= 0");
    path += s;
    holder += std::pow(s, a);
  }
  double adv = 0.0;
  for (double e : in.eps_adv) {
    if (!(e >= 0.0)) throw DomainError("eps_adv", "must be >= 0");
    adv += e;
  }
  UlbDeltas r;
  r.delta_lip = G * path;
  r.delta_holder = a == 1.0 ? r.delta_lip : G * holder;
  r.delta_adv = G * (path + adv);
  r.delta_polymix_rate = a / (1.0 + a);
  return r;
}

BarrierBounds barrier_bounds(const BoundInputs& in, double dist, double gap, double alpha_min) {
  if (!(dist >= 0.0)) throw DomainError("dist", "must be >= 0");
  if (!(alpha_min > 0.0)) throw DomainError("alpha_min", "must be > 0");
  const double G = nonneg(in.G_lip, "G_lip");
  const double mu = nonneg(in.mu, "mu");
  BarrierBounds r;
  r.lip = 0.5 * G * dist * dist;
  r.pl = -std::expm1(-mu * dist / alpha_min) * gap;
  return r;
}

double ema_concentration_time(double delta_c, double beta, double B_grad, double tau) {
  // beta = 0 is admitted: the EMA is then the sample itself.
  if (!(beta >= 0.0 && beta < 1.0)) throw DomainError("beta", "must lie in [0, 1)");
  if (!(delta_c > 0.0)) throw DomainError("delta_c", "must be > 0");
  if (!(B_grad > 0.0)) throw DomainError("B_grad", "must be > 0");
  const double gap = 1.0 - beta;
  const double burn = std::max(0.0, std::log(B_grad / (delta_c * gap))) / gap;
  return std::max(tau, burn);
}

const BoundRow* BoundReport::find(const std::string& name) const {
  for (const auto& r : rows) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

namespace {

ojson pick(const BoundInputs& in, std::initializer_list<const char*> names) {
  const ojson all = in.to_json();
  ojson out = ojson::object();
  for (const char* n : names) {
    if (all.contains(n)) out[n] = all[n];
  }
  return out;
}

}  // namespace

BoundReport evaluate_bounds(const BoundInputs& in, const ReportExtras& extras) {
  BoundReport report;
  auto row = [&](std::string name, std::string ref, std::initializer_list<const char*> used,
                 bool asymptotic, auto&& fn) {
    BoundRow r;
    r.name = std::move(name);
    r.paper_ref = std::move(ref);
    r.inputs = pick(in, used);
    r.asymptotic = asymptotic;
    try {
      r.value = fn();
    } catch (const DomainError& e) {
      r.error = e.what();
    }
    report.rows.push_back(std::move(r));
  };

  for (auto& c : crossing_bounds_table(in)) {
    BoundRow r;
    r.name = c.name;
    r.value = c.value;
    r.exact = c.exact;
    r.asymptotic = c.asymptotic;
    r.error = c.error;
    r.paper_ref = "Finite region bound, refinement table row " + c.name.substr(0, 2);
    if (c.name == "L0_zaslavsky") r.inputs = pick(in, {"N", "D"});
    if (c.name == "L1_margin_cutoff") r.inputs = pick(in, {"N", "T0"});
    if (c.name == "L2_l1_path_length") r.inputs = pick(in, {"P_path"});
    if (c.name == "L3_low_rank") r.inputs = pick(in, {"N", "d_eff"});
    if (c.name == "L4_sparse_tope") r.inputs = pick(in, {"N", "T0", "k", "k_star"});
    if (c.name == "L5_subgaussian") r.inputs = pick(in, {"N", "d_eff"});
    if (c.name == "L6_angular") r.inputs = pick(in, {"theta_ang", "c_ang", "d_eff"});
    report.rows.push_back(std::move(r));
  }

  row("adam_rate_constant", "Adam convergence rate constant C", {"L_smooth", "gamma", "beta1", "beta2", "mu", "lambda_SE"},
      true, [&] { return adam_rate_constant(in); });
  BoundInputs with_c = in;
  if (!with_c.C_conv) {
    try {
      with_c.C_conv = adam_rate_constant(in);
    } catch (const DomainError&) {
    }
  }
  const auto t0_inputs = {"C_conv", "mu", "m", "kappa", "gamma", "C_q"};
  auto t0_row = [&](const char* name, double T0Cutoff::*field) {
    BoundRow r;
    r.name = name;
    r.paper_ref = "Explicit T0 cutoff";
    r.inputs = pick(with_c, t0_inputs);
    r.asymptotic = !in.C_conv.has_value();
    try {
      r.value = t0_cutoff(with_c).*field;
    } catch (const DomainError& e) {
      r.error = e.what();
    }
    report.rows.push_back(std::move(r));
  };
  t0_row("T_dist", &T0Cutoff::T_dist);
  t0_row("T_step", &T0Cutoff::T_step);
  t0_row("T0_cutoff", &T0Cutoff::T0);

  row("T1_spectral", "Spectral floor burn-in", {"B_grad", "tau", "beta2", "delta_floor", "lambda_SE", "d_eff", "N"},
      false, [&] { return t1_spectral(in); });
  row("ema_concentration_time", "Exponential moving average concentration",
      {"delta_floor", "lambda_SE", "beta2", "B_grad", "tau"}, false, [&] {
        const double dc = positive(in.delta_floor, "delta_floor") * positive(in.lambda_SE, "lambda_SE");
        return ema_concentration_time(dc, need(in.beta2, "beta2"), need(in.B_grad, "B_grad"),
                                      in.tau.value_or(0.0));
      });
  if (extras.horizon > 0) {
    row("gradient_rate", "Gradient rate under finite crossings", {"D1", "D2", "kappa", "theta_ang", "c_ang", "d_eff"},
        false, [&] { return gradient_rate(in, extras.horizon); });
  }
  row("rho", "Global convergence rate", {"gamma", "mu", "T0", "kappa"}, false,
      [&] { return rho_rate(in).rho; });
  row("gen_gap", "Generalization after mask freezing", {"G_lip", "R_data", "B_step", "d_eff", "delta_conf", "n_samples"},
      false, [&] { return gen_gap(in); });
  row("rademacher", "Rademacher complexity of the frozen cone", {"G_lip", "R_data", "B_step", "d_eff", "n_samples"},
      false, [&] {
        const long n = need(in.n_samples, "n_samples");
        if (n < 1) throw DomainError("n_samples", "must be >= 1");
        return 12.0 * nonneg(in.G_lip, "G_lip") * nonneg(in.R_data, "R_data") *
               nonneg(in.B_step, "B_step") * std::sqrt(nonneg(in.d_eff, "d_eff") / static_cast<double>(n));
      });
  row("kakeya_cover_half_B", "Kakeya covering number", {"B_step", "d_eff", "C_d"}, false, [&] {
    const double B = positive(in.B_step, "B_step");
    return kakeya_cover_bound(B, 0.5 * B, need(in.d_eff, "d_eff"), need(in.C_d, "C_d"));
  });
  row("step_length", "Bound on the post-freeze step length", {"gamma", "G_max", "lambda_SE", "T0", "kappa"}, false,
      [&] { return step_length_bound(in); });
  row("velocity_C_q", "Bounded coordinate velocity", {"C_q"}, false, [&] { return nonneg(in.C_q, "C_q"); });

  if (!extras.step_norms.empty()) {
    const auto ulb_inputs = {"G_lip", "holder_alpha", "eps_adv"};
    row("ulb_delta_lip", "ULB via path length", ulb_inputs, false,
        [&] { return ulb_deltas(in, extras.step_norms).delta_lip; });
    row("ulb_delta_holder", "ULB under Holder smoothness", ulb_inputs, false,
        [&] { return ulb_deltas(in, extras.step_norms).delta_holder; });
    row("ulb_delta_adv", "ULB under adversarial perturbations", ulb_inputs, false,
        [&] { return ulb_deltas(in, extras.step_norms).delta_adv; });
    row("ulb_polymix_exponent", "Polynomial-mixing drift", {"holder_alpha"}, true,
        [&] { return ulb_deltas(in, extras.step_norms).delta_polymix_rate; });
  }
  if (extras.barrier_dist && extras.barrier_gap && extras.alpha_min) {
    row("barrier_lipschitz", "Lipschitz-gradient barrier bound", {"G_lip"}, false, [&] {
      return barrier_bounds(in, *extras.barrier_dist, *extras.barrier_gap, *extras.alpha_min).lip;
    });
    row("barrier_pl", "Barrier control under PL", {"mu"}, false, [&] {
      return barrier_bounds(in, *extras.barrier_dist, *extras.barrier_gap, *extras.alpha_min).pl;
    });
  }
  return report;
}

ojson to_json(const BoundReport& report) {
  ojson rows = ojson::array();
  for (const auto& r : report.rows) {
    ojson j;
    j["name"] = r.name;
    j["value"] = r.value ? ojson(*r.value) : ojson(nullptr);
    j["exact"] = r.exact.empty() ? ojson(nullptr) : ojson(r.exact);
    j["inputs"] = r.inputs;
    j["asymptotic"] = r.asymptotic;
    j["paper_ref"] = r.paper_ref;
    j["error"] = r.error.empty() ? ojson(nullptr) : ojson(r.error);
    rows.push_back(std::move(j));
  }
  return rows;
}

}  // namespace relulab
