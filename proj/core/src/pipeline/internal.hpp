// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "imuloc/pipeline/pipeline.hpp"

namespace imuloc::pipeline::detail {

eval::RefinementConfig make_refinement_config(const ExperimentConfig& config);
std::uint64_t refine_seed(std::uint64_t seed);
std::uint64_t supervised_seed(std::uint64_t seed);
std::uint64_t dead_reckoning_seed(std::uint64_t seed);
std::vector<std::size_t> train_samples_of(const SharedData& shared, const SeedInputs& inputs);

}  // namespace imuloc::pipeline::detail
