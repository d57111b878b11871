#pragma once

// Seeded synthetic tasks and the frozen probe set used for pattern tracking.

#include "relulab/config.hpp"
#include "relulab/net.hpp"

namespace relulab {

/// The frozen network that labels a teacher_net task.
Params teacher_params(const DatasetSpec& spec, const NetConfig& net);

/// Deterministic in (spec, net.layer_dims). Throws ConfigError on a bad spec.
Dataset generate_dataset(const DatasetSpec& spec, const NetConfig& net);

/// The whole input set when it has at most `probe_size` columns, otherwise a
/// seeded subsample without replacement, in increasing index order.
Matrix select_probes(const Dataset& data, long probe_size, std::uint64_t seed);

}  // namespace relulab
