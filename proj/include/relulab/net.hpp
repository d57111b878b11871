#pragma once

// Dense feed-forward ReLU networks with hand-written forward and reverse
// passes, activation-pattern extraction and margin measurement.
//
// Layer l (1-based) maps R^{d_{l-1}} -> R^{d_l} by z_l = W_l h_{l-1} + b_l.
// Hidden layers apply ReLU, the last layer is linear. The ReLU boundary
// convention is strict: a unit is active iff z > 0, and its subgradient at
// z = 0 is zero.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace relulab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct NetConfig {
  std::vector<int> layer_dims;  // d_0 .. d_n
  double init_scale = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Number of affine layers n.
std::size_t layer_count(std::span<const int> dims);
/// Hidden-unit count N = sum_{l=1}^{n-1} d_l.
std::size_t hidden_count(std::span<const int> dims);
/// Stored parameter count sum_l d_l (d_{l-1} + 1).
std::size_t raw_param_count(std::span<const int> dims);
/// Homogeneous-lift count sum_l (d_l + 1)(d_{l-1} + 1).
std::size_t lifted_param_count(std::span<const int> dims);

/// Weights and biases of every layer in one contiguous buffer.
///
/// Layer l occupies W_l (row-major, d_l x d_{l-1}) followed by b_l. Gradients,
/// optimizer moments and update directions share this layout, so elementwise
/// algebra can work on flat().
class Params {
 public:
  using WeightMap = Eigen::Map<RowMatrix>;
  using ConstWeightMap = Eigen::Map<const RowMatrix>;
  using BiasMap = Eigen::Map<Vector>;
  using ConstBiasMap = Eigen::Map<const Vector>;

  Params() = default;
  explicit Params(std::vector<int> layer_dims);

  /// Zero-filled Params with the same layout as `other`.
  static Params zeros_like(const Params& other) { return Params(other.dims_); }

  const std::vector<int>& dims() const noexcept { return dims_; }
  std::size_t layers() const noexcept { return offsets_.size(); }
  std::size_t size() const noexcept { return data_.size(); }

  WeightMap weight(std::size_t l);
  ConstWeightMap weight(std::size_t l) const;
  BiasMap bias(std::size_t l);
  ConstBiasMap bias(std::size_t l) const;

  std::span<double> flat() noexcept { return data_; }
  std::span<const double> flat() const noexcept { return data_; }
  Eigen::Map<Vector> vec() { return {data_.data(), static_cast<Eigen::Index>(data_.size())}; }
  Eigen::Map<const Vector> vec() const {
    return {data_.data(), static_cast<Eigen::Index>(data_.size())};
  }

  bool same_shape(const Params& other) const noexcept { return dims_ == other.dims_; }
  bool all_finite() const noexcept;

  friend bool operator==(const Params&, const Params&) = default;

 private:
  std::vector<int> dims_;
  std::vector<std::size_t> offsets_;
  std::vector<double> data_;
};

/// Deterministic uniform initialization: W ~ U(+-s/sqrt(d_{l-1})), b ~ U(+-s).
Params init_params(const NetConfig& config);

enum class LossKind { squared_error, cross_entropy_with_logits };

/// Examples are stored column-wise: inputs is d_0 x n, targets is d_n x n.
struct Dataset {
  Matrix inputs;
  Matrix targets;
  LossKind loss_kind = LossKind::squared_error;

  std::size_t size() const noexcept { return static_cast<std::size_t>(inputs.cols()); }
  void validate() const;
};

struct ForwardResult {
  Vector output;
  std::vector<Vector> preacts;  // z_1 .. z_n, the last one equals output
};

ForwardResult forward(const Params& params, const Eigen::Ref<const Vector>& x);

/// Outputs for every column of `inputs`, computed exactly as the loss computes them.
Matrix forward_batch(const Params& params, const Eigen::Ref<const Matrix>& inputs);

struct LossGrad {
  double loss = 0.0;
  Params grad;
};

/// Mean per-example loss and its exact reverse-mode gradient.
///
/// Squared error is 0.5 * ||f(x) - y||^2. Cross-entropy treats targets as
/// probability vectors and uses a max-shifted log-sum-exp.
LossGrad loss_and_grad(const Params& params, const Dataset& data);

/// Loss only; cheaper than loss_and_grad.
double loss_value(const Params& params, const Dataset& data);

/// Per-example gradients, one column per example (size() x n).
Matrix per_example_grads(const Params& params, const Dataset& data);

struct ActivationPattern {
  std::vector<std::uint8_t> bits;  // one byte per hidden unit, layer-major
  std::size_t active = 0;          // k

  friend bool operator==(const ActivationPattern&, const ActivationPattern&) = default;
};

ActivationPattern activation_pattern(const Params& params, const Eigen::Ref<const Vector>& x);

/// Hidden pre-activations for every column of `inputs` (N x n, layer-major rows).
Matrix hidden_preacts(const Params& params, const Eigen::Ref<const Matrix>& inputs);

/// min over hidden units and inputs of |z|; +inf for nets with no hidden layer.
double margin(const Params& params, const Eigen::Ref<const Matrix>& inputs);
inline double margin(const Params& params, const Dataset& data) {
  return margin(params, data.inputs);
}

/// Per-hidden-layer margins (size n-1).
std::vector<double> layer_margins(const Params& params, const Eigen::Ref<const Matrix>& inputs);

/// Largest singular value of `m` by power iteration on m^T m.
///
/// Sets *converged to false when 1000 iterations were not enough; the last
/// iterate is returned either way.
double spectral_norm(const Eigen::Ref<const Matrix>& m, bool* converged = nullptr);

/// Product over layers of the spectral norms of W_l with the columns of
/// inactive units of layer l-1 zeroed, maximised over `probes` (columns).
/// This bounds how fast any pre-activation moves within the probes' cones.
double lipschitz_estimate(const Params& params, const Eigen::Ref<const Matrix>& probes);

/// Same product with every unit treated as active.
double lipschitz_estimate(const Params& params);

/// First-order bound on the sensitivity of hidden pre-activations to a
/// parameter perturbation, maximised over probes. Unlike lipschitz_estimate
/// it accounts for the input norms that multiply weight perturbations:
///   max_l sqrt( sum_{j<=l} (prod_{j<i<=l} ||W_i D_{i-1}|| * sqrt(||h_{j-1}||^2 + 1))^2 ).
double parameter_sensitivity(const Params& params, const Eigen::Ref<const Matrix>& probes);

/// 64-bit FNV-1a over the pattern bytes.
std::uint64_t pattern_hash(std::span<const std::uint8_t> bits);

}  // namespace relulab
