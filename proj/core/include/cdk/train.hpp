#pragma once

#include <cstdint>
#include <vector>

#include "cdk/dataset.hpp"
#include "cdk/prompt.hpp"
#include "cdk/schedule.hpp"
#include "cdk/unet.hpp"

namespace cdk {

enum class AugMode { Random, Fixed };

/// Plain SGD with a fixed learning rate and linear warmup.
struct TrainConfig {
    int epochs = 2;
    int batch_size = 16;
    double lr = 0.02;
    int warmup_steps = 40;
    double p_drop = 0.1;       // conditioning dropout probability
    AugMode aug_mode = AugMode::Random;  // SR stages: aug ~ U(0,1) or fixed
    double aug_fixed = 0.0;
};

struct TrainResult {
    ParamSet params;
    std::vector<double> epoch_loss;  // mean per epoch
    long null_cond_count = 0;        // examples trained with null conditioning
    long example_count = 0;
};

PoolMode pool_mode_for(CondMode mode);

/// Minibatch gradient descent on the eps-space denoising objective with
/// conditioning dropout; SR nets additionally receive the corrupted and
/// upsampled low-res conditioner plus its aug level. Deterministic: the same
/// seed yields bitwise-identical parameters regardless of CDK_THREADS.
TrainResult train_denoiser(const ToyUNet& net, const BlobDataset& dataset,
                           const TrainConfig& config, const Schedule& schedule,
                           const PromptEncoder& encoder, std::uint64_t seed);

}  // namespace cdk
