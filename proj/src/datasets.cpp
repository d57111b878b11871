#include "relulab/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "relulab/errors.hpp"
#include "relulab/rng.hpp"

namespace relulab {

namespace {

constexpr std::uint64_t kTeacherSalt = 0x7465616368657221ULL;
constexpr std::uint64_t kProbeSalt = 0x70726f6265736574ULL;

void check_net(const NetConfig& net) {
  try {
    net.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

Params teacher_params(const DatasetSpec& spec, const NetConfig& net) {
  check_net(net);
  NetConfig t = net;
  t.seed = spec.seed ^ kTeacherSalt;
  t.init_scale = 1.0;
  return init_params(t);
}

Dataset generate_dataset(const DatasetSpec& spec, const NetConfig& net) {
  spec.validate();
  check_net(net);
  const int d0 = net.layer_dims.front();
  const int dn = net.layer_dims.back();
  const Eigen::Index n = spec.n_samples;
  Rng rng(spec.seed);
  Dataset data;
  data.inputs.resize(d0, n);
  data.targets.resize(dn, n);
  data.loss_kind = spec.loss.value_or(default_loss(spec.kind, dn));

  switch (spec.kind) {
    case DatasetKind::teacher_net: {
      const Params teacher = teacher_params(spec, net);
      for (Eigen::Index i = 0; i < n; ++i) {
        for (int k = 0; k < d0; ++k) data.inputs(k, i) = rng.normal();
      }
      data.targets = forward_batch(teacher, data.inputs);
      for (Eigen::Index i = 0; i < n; ++i) {
        for (int k = 0; k < dn; ++k) data.targets(k, i) += spec.noise * rng.normal();
      }
      break;
    }
    case DatasetKind::gaussian_blobs: {
      if (dn < 2) throw ConfigError("gaussian_blobs needs at least 2 outputs");
      Matrix centers(d0, dn);
      for (int c = 0; c < dn; ++c) {
        for (int k = 0; k < d0; ++k) centers(k, c) = 3.0 * rng.normal();
      }
      data.targets.setZero();
      for (Eigen::Index i = 0; i < n; ++i) {
        const int c = static_cast<int>(i % dn);
        for (int k = 0; k < d0; ++k) data.inputs(k, i) = centers(k, c) + spec.noise * rng.normal();
        data.targets(c, i) = 1.0;
      }
      break;
    }
    case DatasetKind::xor_ring: {
      if (d0 != 2) throw ConfigError("xor_ring needs 2 inputs");
      if (dn != 1 && dn != 2) throw ConfigError("xor_ring needs 1 or 2 outputs");
      data.targets.setZero();
      for (Eigen::Index i = 0; i < n; ++i) {
        const double r = rng.uniform(1.0, 2.0);
        const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double x = r * std::cos(phi) + spec.noise * rng.normal();
        const double y = r * std::sin(phi) + spec.noise * rng.normal();
        data.inputs(0, i) = x;
        data.inputs(1, i) = y;
        const bool positive = r * std::cos(phi) * r * std::sin(phi) > 0.0;
        if (dn == 1) data.targets(0, i) = positive ? 1.0 : -1.0;
        else data.targets(positive ? 1 : 0, i) = 1.0;
      }
      break;
    }
  }
  data.validate();
  return data;
}

Matrix select_probes(const Dataset& data, long probe_size, std::uint64_t seed) {
  if (probe_size < 1) throw ConfigError("probe_size must be >= 1");
  const long n = static_cast<long>(data.size());
  if (n <= probe_size) return data.inputs;
  std::vector<long> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0L);
  Rng rng(seed ^ kProbeSalt);
  for (long i = 0; i < probe_size; ++i) {
    const long j = i + static_cast<long>(rng.below(static_cast<std::uint64_t>(n - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(probe_size));
  std::sort(idx.begin(), idx.end());
  Matrix probes(data.inputs.rows(), probe_size);
  for (long i = 0; i < probe_size; ++i) probes.col(i) = data.inputs.col(idx[static_cast<std::size_t>(i)]);
  return probes;
}

}  // namespace relulab
