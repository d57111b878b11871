#pragma once

// Closed-form evaluation of the crossing bounds, burn-in times, rates,
// generalization gaps and barrier bounds from measured or supplied constants.
//
// Every formula validates the inputs it reads and raises DomainError naming
// the offending field. O(.) statements are evaluated with constant 1 and
// marked asymptotic; they are never asserted as inequalities.

#include <optional>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <json.hpp>

namespace relulab {

using BigInt = boost::multiprecision::cpp_int;

struct BoundInputs {
  std::optional<long> N;           // hidden units
  std::optional<long> D;           // parameter count
  std::optional<double> d_eff;
  std::optional<double> mu;        // PL constant
  std::optional<double> L_smooth;
  std::optional<double> m;         // margin
  std::optional<double> gamma;
  std::optional<double> kappa;
  std::optional<double> C_conv;    // constant of the Adam convergence rate
  std::optional<double> C_q;
  std::optional<double> tau;       // mixing time
  std::optional<double> delta_conf;
  std::optional<double> delta_floor;  // relative slack of the spectral floor
  std::optional<double> lambda_SE;
  std::optional<double> beta1;
  std::optional<double> beta2;
  std::optional<long> k;
  std::optional<long> k_star;
  std::optional<double> theta_ang;
  std::optional<double> c_ang = 1.0;
  std::optional<double> G_max;
  std::optional<double> D1;
  std::optional<double> D2;
  std::optional<double> G_lip;
  std::optional<double> R_data;
  std::optional<double> B_step;
  std::optional<long> n_samples;
  std::optional<double> T0;
  std::optional<double> P_path;
  std::optional<double> holder_alpha;
  std::vector<double> eps_adv;
  std::optional<double> B_grad;
  std::optional<double> B_weight;  // layer-norm bound; reported only
  std::optional<double> C_d = 1.0; // Kakeya covering constant

  /// Fields present in `j` overwrite the current values; unknown keys throw.
  void merge_json(const nlohmann::json& j);
  nlohmann::ordered_json to_json() const;
};

/// sum_{i=0}^{min(d,N)} C(N, i), exact.
BigInt zaslavsky(long N, long d);

struct T0Cutoff {
  double T_dist = 0.0;
  double T_step = 0.0;
  double T0 = 0.0;
};

T0Cutoff t0_cutoff(const BoundInputs& in);

/// T_1 = 2 B^2 (1 + 2 tau (1-beta2)) ln(2 d_eff N) / ((1-beta2)^2 delta^2 lambda_SE^2),
/// with delta = delta_floor and B = B_grad.
double t1_spectral(const BoundInputs& in);

/// Default for C_conv: L gamma^2 (1-beta1)^2 / (mu (1-beta2) lambda_SE), constant 1.
double adam_rate_constant(const BoundInputs& in);

struct CrossingRow {
  std::string name;
  std::optional<double> value;
  std::string exact;  // decimal digits for the exact binomial sums
  bool asymptotic = false;
  std::string error;
};

/// Rows L0..L6 of the crossing-bound refinement table.
std::vector<CrossingRow> crossing_bounds_table(const BoundInputs& in);

double crossing_l4(const BoundInputs& in);
double crossing_l6(const BoundInputs& in);

/// (D1 + D2 * L6) / T^{min(1, kappa)}
double gradient_rate(const BoundInputs& in, long T);

struct RhoRate {
  double rho = 1.0;
  bool contractive = false;
};

RhoRate rho_rate(const BoundInputs& in);

/// 24 G R B sqrt((d_eff + ln(2/delta)) / n)
double gen_gap(const BoundInputs& in);

/// C_d (B / eps)^{d_eff - 1/2}
double kakeya_cover_bound(double B_step, double eps, double d_eff, double C_d);

/// gamma G / (sqrt(lambda_SE) T0 ln(T0)^{1+kappa})
double step_length_bound(const BoundInputs& in);

struct UlbDeltas {
  double delta_lip = 0.0;
  double delta_holder = 0.0;
  double delta_adv = 0.0;
  double delta_polymix_rate = 0.0;  // exponent a/(1+a) of the polynomial-mixing drift
};

UlbDeltas ulb_deltas(const BoundInputs& in, const std::vector<double>& step_norms);

struct BarrierBounds {
  double lip = 0.0;
  double pl = 0.0;
};

BarrierBounds barrier_bounds(const BoundInputs& in, double dist, double gap, double alpha_min);

/// max(tau, ln(B / (delta (1-beta))) / (1-beta)), negative logs clamp to 0.
double ema_concentration_time(double delta_c, double beta, double B_grad, double tau);

struct BoundRow {
  std::string name;
  std::optional<double> value;
  std::string exact;
  nlohmann::ordered_json inputs = nlohmann::ordered_json::object();
  bool asymptotic = false;
  std::string paper_ref;  // which published result the row evaluates
  std::string error;
};

struct BoundReport {
  std::vector<BoundRow> rows;

  const BoundRow* find(const std::string& name) const;
};

struct ReportExtras {
  long horizon = 0;                 // T for gradient_rate; 0 skips the row
  std::vector<double> step_norms;   // for the ULB deltas
  std::optional<double> barrier_dist;
  std::optional<double> barrier_gap;
  std::optional<double> alpha_min;
};

/// Evaluate every formula that the inputs allow. Rows whose inputs are
/// missing or out of range carry the error text instead of a value.
BoundReport evaluate_bounds(const BoundInputs& in, const ReportExtras& extras = {});

nlohmann::ordered_json to_json(const BoundReport& report);

}  // namespace relulab
