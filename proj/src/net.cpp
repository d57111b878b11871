#include "relulab/net.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "relulab/errors.hpp"
#include "relulab/rng.hpp"

namespace relulab {

void NetConfig::validate() const {
  if (layer_dims.size() < 2) throw ConfigError("net.layer_dims needs at least two entries");
  for (int d : layer_dims) {
    if (d < 1) throw ConfigError("net.layer_dims entries must be >= 1");
  }
  if (!(init_scale > 0.0) || !std::isfinite(init_scale)) {
    throw ConfigError("net.init_scale must be positive");
  }
}

std::size_t layer_count(std::span<const int> dims) { return dims.empty() ? 0 : dims.size() - 1; }

std::size_t hidden_count(std::span<const int> dims) {
  if (dims.size() < 3) return 0;
  std::size_t n = 0;
  for (std::size_t l = 1; l + 1 < dims.size(); ++l) n += static_cast<std::size_t>(dims[l]);
  return n;
}

std::size_t raw_param_count(std::span<const int> dims) {
  std::size_t n = 0;
  for (std::size_t l = 1; l < dims.size(); ++l) {
    n += static_cast<std::size_t>(dims[l]) * static_cast<std::size_t>(dims[l - 1] + 1);
  }
  return n;
}

std::size_t lifted_param_count(std::span<const int> dims) {
  std::size_t n = 0;
  for (std::size_t l = 1; l < dims.size(); ++l) {
    n += static_cast<std::size_t>(dims[l] + 1) * static_cast<std::size_t>(dims[l - 1] + 1);
  }
  return n;
}

Params::Params(std::vector<int> layer_dims) : dims_(std::move(layer_dims)) {
  std::size_t offset = 0;
  for (std::size_t l = 1; l < dims_.size(); ++l) {
    offsets_.push_back(offset);
    offset += static_cast<std::size_t>(dims_[l]) * static_cast<std::size_t>(dims_[l - 1] + 1);
  }
  data_.assign(offset, 0.0);
}

Params::WeightMap Params::weight(std::size_t l) {
  return {data_.data() + offsets_[l], dims_[l + 1], dims_[l]};
}
Params::ConstWeightMap Params::weight(std::size_t l) const {
  return {data_.data() + offsets_[l], dims_[l + 1], dims_[l]};
}
Params::BiasMap Params::bias(std::size_t l) {
  return {data_.data() + offsets_[l] + static_cast<std::size_t>(dims_[l + 1]) * dims_[l],
          dims_[l + 1]};
}
Params::ConstBiasMap Params::bias(std::size_t l) const {
  return {data_.data() + offsets_[l] + static_cast<std::size_t>(dims_[l + 1]) * dims_[l],
          dims_[l + 1]};
}

bool Params::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Params init_params(const NetConfig& config) {
  config.validate();
  Params p(config.layer_dims);
  Rng rng(config.seed);
  for (std::size_t l = 0; l < p.layers(); ++l) {
    const double wscale = config.init_scale / std::sqrt(static_cast<double>(config.layer_dims[l]));
    auto w = p.weight(l);
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-wscale, wscale);
    }
    auto b = p.bias(l);
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      b(i) = rng.uniform(-config.init_scale, config.init_scale);
    }
  }
  return p;
}

void Dataset::validate() const {
  if (inputs.cols() == 0) throw ShapeError("dataset is empty");
  if (inputs.cols() != targets.cols()) throw ShapeError("dataset inputs/targets length mismatch");
  if (!targets.allFinite()) throw DomainError("targets", "non-finite target");
}

namespace {

void check_input_dims(const Params& params, Eigen::Index rows) {
  if (params.dims().empty()) throw ShapeError("params have no layers");
  if (rows != params.dims().front()) {
    throw ShapeError("input has length " + std::to_string(rows) + ", network expects " +
                     std::to_string(params.dims().front()));
  }
}

// Pre-activations z_l for a batch; hidden layers are ReLU-ed into the next input.
std::vector<Matrix> batch_forward(const Params& params, const Eigen::Ref<const Matrix>& inputs) {
  std::vector<Matrix> z(params.layers());
  Matrix h = inputs;
  for (std::size_t l = 0; l < params.layers(); ++l) {
    z[l] = params.weight(l) * h;
    z[l].colwise() += params.bias(l);
    if (l + 1 < params.layers()) h = z[l].cwiseMax(0.0);
  }
  return z;
}

struct BatchLoss {
  double total = 0.0;
  Matrix dout;  // d loss_i / d output, one column per example
};

BatchLoss batch_loss(const Matrix& out, const Dataset& data, bool want_grad) {
  BatchLoss r;
  if (out.rows() != data.targets.rows()) {
    throw ShapeError("targets have " + std::to_string(data.targets.rows()) +
                     " rows, network outputs " + std::to_string(out.rows()));
  }
  if (data.loss_kind == LossKind::squared_error) {
    Matrix diff = out - data.targets;
    r.total = 0.5 * diff.squaredNorm();
    if (want_grad) r.dout = std::move(diff);
    return r;
  }
  if (want_grad) r.dout.resize(out.rows(), out.cols());
  for (Eigen::Index i = 0; i < out.cols(); ++i) {
    const double mx = out.col(i).maxCoeff();
    Vector shifted = out.col(i).array() - mx;
    const double lse = std::log(shifted.array().exp().sum());
    Vector logp = shifted.array() - lse;
    r.total -= data.targets.col(i).dot(logp);
    if (want_grad) {
      r.dout.col(i) = logp.array().exp().matrix() * data.targets.col(i).sum() - data.targets.col(i);
    }
  }
  return r;
}

}  // namespace

ForwardResult forward(const Params& params, const Eigen::Ref<const Vector>& x) {
  check_input_dims(params, x.size());
  if (!x.allFinite()) throw DomainError("x", "non-finite input");
  ForwardResult r;
  Vector h = x;
  for (std::size_t l = 0; l < params.layers(); ++l) {
    Vector z = params.weight(l) * h + params.bias(l);
    if (l + 1 < params.layers()) h = z.cwiseMax(0.0);
    r.preacts.push_back(std::move(z));
  }
  r.output = r.preacts.back();
  return r;
}

Matrix forward_batch(const Params& params, const Eigen::Ref<const Matrix>& inputs) {
  check_input_dims(params, inputs.rows());
  return batch_forward(params, inputs).back();
}

LossGrad loss_and_grad(const Params& params, const Dataset& data) {
  data.validate();
  check_input_dims(params, data.inputs.rows());
  const auto n = static_cast<double>(data.size());
  const std::size_t layers = params.layers();

  std::vector<Matrix> z = batch_forward(params, data.inputs);
  BatchLoss bl = batch_loss(z.back(), data, true);
  LossGrad r{bl.total / n, Params::zeros_like(params)};
  if (!std::isfinite(r.loss)) throw NumericError("non-finite loss");

  Matrix delta = bl.dout / n;
  for (std::size_t l = layers; l-- > 0;) {
    if (l == 0) {
      r.grad.weight(0).noalias() = delta * data.inputs.transpose();
    } else {
      r.grad.weight(l).noalias() = delta * z[l - 1].cwiseMax(0.0).transpose();
    }
    r.grad.bias(l) = delta.rowwise().sum();
    if (l > 0) {
      Matrix back = params.weight(l).transpose() * delta;
      delta = (z[l - 1].array() > 0.0).select(back, 0.0);
    }
  }
  if (!r.grad.all_finite()) throw NumericError("non-finite gradient");
  return r;
}

double loss_value(const Params& params, const Dataset& data) {
  data.validate();
  check_input_dims(params, data.inputs.rows());
  std::vector<Matrix> z = batch_forward(params, data.inputs);
  const double loss = batch_loss(z.back(), data, false).total / static_cast<double>(data.size());
  if (!std::isfinite(loss)) throw NumericError("non-finite loss");
  return loss;
}

Matrix per_example_grads(const Params& params, const Dataset& data) {
  data.validate();
  Matrix out(static_cast<Eigen::Index>(params.size()), static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    Dataset one{data.inputs.col(static_cast<Eigen::Index>(i)),
                data.targets.col(static_cast<Eigen::Index>(i)), data.loss_kind};
    out.col(static_cast<Eigen::Index>(i)) = loss_and_grad(params, one).grad.vec();
  }
  return out;
}

Matrix hidden_preacts(const Params& params, const Eigen::Ref<const Matrix>& inputs) {
  check_input_dims(params, inputs.rows());
  const auto hidden = static_cast<Eigen::Index>(hidden_count(params.dims()));
  Matrix out(hidden, inputs.cols());
  if (hidden == 0) return out;
  std::vector<Matrix> z = batch_forward(params, inputs);
  Eigen::Index row = 0;
  for (std::size_t l = 0; l + 1 < params.layers(); ++l) {
    out.middleRows(row, z[l].rows()) = z[l];
    row += z[l].rows();
  }
  return out;
}

ActivationPattern activation_pattern(const Params& params, const Eigen::Ref<const Vector>& x) {
  Matrix z = hidden_preacts(params, x);
  ActivationPattern p;
  p.bits.resize(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    p.bits[static_cast<std::size_t>(i)] = z(i, 0) > 0.0 ? 1 : 0;
    p.active += p.bits[static_cast<std::size_t>(i)];
  }
  return p;
}

double margin(const Params& params, const Eigen::Ref<const Matrix>& inputs) {
  Matrix z = hidden_preacts(params, inputs);
  if (z.size() == 0) return std::numeric_limits<double>::infinity();
  return z.cwiseAbs().minCoeff();
}

std::vector<double> layer_margins(const Params& params, const Eigen::Ref<const Matrix>& inputs) {
  check_input_dims(params, inputs.rows());
  std::vector<Matrix> z = batch_forward(params, inputs);
  std::vector<double> out;
  for (std::size_t l = 0; l + 1 < params.layers(); ++l) {
    out.push_back(z[l].size() == 0 ? std::numeric_limits<double>::infinity()
                                   : z[l].cwiseAbs().minCoeff());
  }
  return out;
}

double spectral_norm(const Eigen::Ref<const Matrix>& m, bool* converged) {
  if (converged) *converged = true;
  if (m.size() == 0 || m.isZero(0.0)) return 0.0;
  // Fixed, generic start vector so the result is reproducible.
  Vector v(m.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = 1.0 + 0.618033988749895 * std::sin(1.0 + i);
  v.normalize();
  double sigma = 0.0;
  for (int iter = 0; iter < 1000; ++iter) {
    Vector u = m * v;
    Vector w = m.transpose() * u;
    const double wn = w.norm();
    if (wn == 0.0) return 0.0;
    const double next = std::sqrt(wn);
    w /= wn;
    const bool done = std::abs(next - sigma) <= 1e-14 * next && (w - v).norm() < 1e-10;
    sigma = next;
    v = std::move(w);
    if (done) return sigma;
  }
  if (converged) *converged = false;
  return sigma;
}

namespace {

// Product of masked spectral norms given one hidden pattern (nullptr = all on).
double masked_norm_product(const Params& params, const std::uint8_t* bits) {
  double product = 1.0;
  std::size_t offset = 0;
  for (std::size_t l = 0; l < params.layers(); ++l) {
    Matrix w = params.weight(l);
    if (l > 0 && bits != nullptr) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        if (bits[offset + static_cast<std::size_t>(j)] == 0) w.col(j).setZero();
      }
      offset += static_cast<std::size_t>(w.cols());
    }
    product *= spectral_norm(w);
    if (product == 0.0) return 0.0;
  }
  return product;
}

}  // namespace

double lipschitz_estimate(const Params& params) {
  if (!params.all_finite()) throw DomainError("params", "non-finite parameters");
  return masked_norm_product(params, nullptr);
}

double lipschitz_estimate(const Params& params, const Eigen::Ref<const Matrix>& probes) {
  if (!params.all_finite()) throw DomainError("params", "non-finite parameters");
  Matrix z = hidden_preacts(params, probes);
  if (z.rows() == 0) return masked_norm_product(params, nullptr);
  // Probes frequently share a pattern; evaluate each distinct one once.
  std::vector<std::vector<std::uint8_t>> seen;
  double best = 0.0;
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    for (Eigen::Index i = 0; i < z.rows(); ++i) bits[static_cast<std::size_t>(i)] = z(i, c) > 0.0;
    if (std::find(seen.begin(), seen.end(), bits) != seen.end()) continue;
    seen.push_back(bits);
    best = std::max(best, masked_norm_product(params, bits.data()));
  }
  return best;
}

double parameter_sensitivity(const Params& params, const Eigen::Ref<const Matrix>& probes) {
  check_input_dims(params, probes.rows());
  const std::size_t hidden_layers = params.layers() - 1;
  if (hidden_layers == 0) return 0.0;
  std::vector<Matrix> z = batch_forward(params, probes);
  double best = 0.0;
  for (Eigen::Index c = 0; c < probes.cols(); ++c) {
    // input_norm[j] = sqrt(||h_{j}||^2 + 1) for the input of layer j+1
    std::vector<double> input_norm(hidden_layers);
    std::vector<double> gain(hidden_layers);  // ||W_{l} D_{l-1}|| for l >= 1
    input_norm[0] = std::sqrt(probes.col(c).squaredNorm() + 1.0);
    for (std::size_t l = 1; l < hidden_layers; ++l) {
      Vector h = z[l - 1].col(c).cwiseMax(0.0);
      input_norm[l] = std::sqrt(h.squaredNorm() + 1.0);
      Matrix w = params.weight(l);
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        if (!(z[l - 1](j, c) > 0.0)) w.col(j).setZero();
      }
      gain[l] = spectral_norm(w);
    }
    for (std::size_t target = 0; target < hidden_layers; ++target) {
      double sum_sq = 0.0;
      for (std::size_t j = 0; j <= target; ++j) {
        double coeff = input_norm[j];
        for (std::size_t i = j + 1; i <= target; ++i) coeff *= gain[i];
        sum_sq += coeff * coeff;
      }
      best = std::max(best, std::sqrt(sum_sq));
    }
  }
  return best;
}

std::uint64_t pattern_hash(std::span<const std::uint8_t> bits) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bits) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace relulab
