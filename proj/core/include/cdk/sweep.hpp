#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cdk/prompt.hpp"
#include "cdk/tensor.hpp"

namespace cdk {

struct SweepRow {
    double w = 1.0;
    double fid_toy = 0.0;
    double align_toy = 0.0;
    int n = 0;
};

/// Generates one image for (guidance weight, prompt); chain_id seeds the
/// generator's rng stream so sweeps are reproducible and parallelizable.
using SweepSampleFn =
    std::function<TensorF(double w, const PromptSeq& prompt, std::uint64_t chain_id)>;

/// The 13-weight default sweep grid.
const std::vector<double>& default_sweep_weights();

/// For each weight: n samples (prompts cycled from `prompts`), toy Frechet
/// distance of their features against the reference features, and the mean
/// alignment score. Rows come back sorted by w. Requires n >= 32 and a
/// non-empty reference set.
std::vector<SweepRow> guidance_sweep(const SweepSampleFn& sample_fn,
                                     const std::vector<double>& weights, int n,
                                     const std::vector<std::vector<double>>& reference_features,
                                     const std::vector<PromptSeq>& prompts,
                                     const PromptEncoder& encoder);

/// CSV with header `w,fid_toy,align_toy,n`, one row per weight.
void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows);

}  // namespace cdk
