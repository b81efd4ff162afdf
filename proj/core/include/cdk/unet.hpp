#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "cdk/autodiff.hpp"
#include "cdk/denoiser.hpp"
#include "cdk/prompt.hpp"
#include "cdk/rng.hpp"
#include "cdk/schedule.hpp"
#include "cdk/tensor.hpp"

namespace cdk {

enum class CondMode { MeanPool, AttentionPool, CrossAttention };

/// One resolution stage. stride is the downsample applied by the encoder
/// block's entry conv (and undone at the end of the matching decoder block).
struct StageSpec {
    int channels = 16;
    int num_res_blocks = 1;
    int stride = 1;
    bool self_attention = false;
    bool cross_attention = false;
};

/// Toy diffusion U-Net configuration. Encoder blocks downsample first, then
/// run ResNet blocks and optional attention; decoder blocks mirror them with
/// skip connections added at scale 1/sqrt(2) and upsample at the end.
/// Channels never decrease toward low resolution and the lowest stage has at
/// least as many ResNet blocks as the highest.
struct ToyUNetConfig {
    std::vector<StageSpec> stages;
    CondMode cond_mode = CondMode::CrossAttention;
    int in_channels = 3;
    int out_channels = 3;
    int emb_dim = 32;
    int attn_heads = 2;
    bool sr_conditioned = false;  // adds the aug-level embedding pathway
    float skip_scale = 0.70710678f;

    void validate() const;

    static ToyUNetConfig base_default();
    static ToyUNetConfig sr_default();
};

/// Ordered named parameter tensors; the checkpoint unit of the toy models.
struct ParamSet {
    std::vector<std::pair<std::string, TensorF>> items;

    void add(std::string name, TensorF t);
    const TensorF* find(const std::string& name) const;
    TensorF* find(const std::string& name);
    std::size_t total_size() const;
};

/// Sinusoidal features of a scalar in [0, 1] (the time / aug pathway).
TensorF sinusoid_embedding(double u, int dim);

TensorF concat_channels(const TensorF& a, const TensorF& b);

/// Named probe values recorded during a forward build (for tests).
struct BuildProbes {
    std::vector<std::pair<std::string, int>> nodes;
    int find(const std::string& name) const;
};

class ToyUNet {
public:
    explicit ToyUNet(ToyUNetConfig cfg);

    const ToyUNetConfig& config() const { return cfg_; }

    ParamSet init_params(RngStream& rng) const;

    /// Binds a parameter set onto a tape as leaves.
    std::unordered_map<std::string, int> bind(Tape& tape, const ParamSet& params,
                                              bool needs_grad) const;

    /// Builds the eps-prediction graph. z_in already carries the low-res
    /// conditioning channels for SR nets; aug is ignored unless the config is
    /// sr_conditioned.
    int build(Tape& tape, const std::unordered_map<std::string, int>& vars, const TensorF& z_in,
              const NoiseLevel& level, const PromptEmbedding& cond, double aug = 0.0,
              BuildProbes* probes = nullptr) const;

    /// Convenience forward pass without gradients.
    TensorF forward(const ParamSet& params, const TensorF& z_in, const NoiseLevel& level,
                    const PromptEmbedding& cond, double aug = 0.0) const;

    /// Parameter count restricted to one stage's encoder+decoder blocks.
    std::size_t stage_param_count(const ParamSet& params, int stage) const;

private:
    struct ParamSpec {
        std::string name;
        std::vector<int> shape;
        enum class Init { HeConv, Linear, Ones, Zeros } init;
    };
    std::vector<ParamSpec> param_specs() const;

    ToyUNetConfig cfg_;
};

/// Denoiser adapter over a trained (or freshly initialized) toy U-Net.
/// For SR nets, lr_cond must be the already corrupted and upsampled low-res
/// conditioner; it is concatenated channel-wise with the latent.
class UNetDenoiser : public Denoiser {
public:
    UNetDenoiser(const ToyUNet& net, const ParamSet& params);
    UNetDenoiser(const ToyUNet& net, const ParamSet& params, TensorF lr_cond, double aug);

    TensorF eps_hat(const TensorF& z_t, const NoiseLevel& level,
                    const PromptEmbedding& cond) const override;

private:
    const ToyUNet& net_;
    const ParamSet& params_;
    TensorF lr_cond_;
    bool has_lr_ = false;
    double aug_ = 0.0;
};

}  // namespace cdk
