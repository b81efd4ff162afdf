#include "cdk/train.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "cdk/diffusion.hpp"
#include "cdk/parallel.hpp"
#include "cdk/resample.hpp"
#include "cdk/sampling.hpp"

namespace cdk {

PoolMode pool_mode_for(CondMode mode) {
    return mode == CondMode::AttentionPool ? PoolMode::Attention : PoolMode::Mean;
}

namespace {

// Everything random for one example, drawn sequentially up front so the
// parallel gradient computation cannot perturb the stream order.
struct DrawPack {
    std::size_t index = 0;
    double t = 0.5;
    bool dropped = false;
    double aug = 0.0;
    TensorF eps;      // latent noise
    TensorF eps_lr;   // conditioner corruption noise (SR only)
};

struct SampleGrad {
    std::vector<TensorF> grads;  // aligned with ParamSet items
    double loss = 0.0;
};

}  // namespace

TrainResult train_denoiser(const ToyUNet& net, const BlobDataset& dataset,
                           const TrainConfig& config, const Schedule& schedule,
                           const PromptEncoder& encoder, std::uint64_t seed) {
    if (dataset.items.empty()) throw std::invalid_argument("train: empty dataset");
    if (config.batch_size < 1 || config.epochs < 1)
        throw std::invalid_argument("train: bad batch size or epoch count");
    const bool sr = net.config().sr_conditioned;
    const PoolMode pool = pool_mode_for(net.config().cond_mode);

    RngStream init_rng(seed, 0);
    RngStream order_rng(seed, 1);
    RngStream draw_rng(seed, 2);

    TrainResult result;
    result.params = net.init_params(init_rng);
    const std::size_t n_params = result.params.items.size();

    // Prompts repeat heavily; encode each distinct one once.
    std::map<std::string, PromptEmbedding> embed_cache;
    for (const auto& ex : dataset.items) {
        const std::string key = ex.prompt.text();
        if (!embed_cache.count(key)) embed_cache[key] = encoder.encode(ex.prompt, pool);
    }

    const std::size_t n = dataset.items.size();
    std::vector<std::size_t> order(n);
    long step = 0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        for (std::size_t i = n - 1; i > 0; --i)
            std::swap(order[i], order[order_rng.uniform_index(i + 1)]);

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t bs = std::min(static_cast<std::size_t>(config.batch_size), n - start);

            std::vector<DrawPack> draws(bs);
            for (std::size_t b = 0; b < bs; ++b) {
                DrawPack& d = draws[b];
                d.index = order[start + b];
                const BlobExample& ex = dataset.items[d.index];
                d.t = draw_rng.uniform();
                d.eps = draw_rng.normal_tensor(ex.image.shape());
                d.dropped = draw_rng.uniform() < config.p_drop;
                if (sr) {
                    d.aug = config.aug_mode == AugMode::Random ? draw_rng.uniform()
                                                               : config.aug_fixed;
                    d.eps_lr = draw_rng.normal_tensor(ex.low_res.shape());
                }
                if (d.dropped) ++result.null_cond_count;
                ++result.example_count;
            }

            std::vector<SampleGrad> per_sample(bs);
            parallel_for(bs, [&](std::size_t b) {
                const DrawPack& d = draws[b];
                const BlobExample& ex = dataset.items[d.index];
                const NoiseLevel level = level_at(schedule, d.t);
                TensorF z = forward_marginal(ex.image, level, d.eps);
                if (sr) {
                    const NoiseLevel aug_level = level_at(schedule, d.aug);
                    const TensorF corrupted = forward_marginal(ex.low_res, aug_level, d.eps_lr);
                    z = concat_channels(z, upsample_bilinear(corrupted, 2));
                }
                const PromptEmbedding& cond = d.dropped
                                                  ? PromptEmbedding::null_embedding()
                                                  : embed_cache.at(ex.prompt.text());
                Tape tape;
                const auto vars = net.bind(tape, result.params, true);
                const int out = net.build(tape, vars, z, level, cond, d.aug);
                const int loss = tape.mse(out, d.eps);
                tape.backward(loss);

                SampleGrad& sg = per_sample[b];
                sg.loss = tape.value(loss)[0];
                sg.grads.reserve(n_params);
                for (const auto& [name, param] : result.params.items)
                    sg.grads.push_back(tape.grad(vars.at(name)));
            });

            // Fixed-order reduction keeps the update bitwise deterministic.
            std::vector<TensorF> acc(n_params);
            for (std::size_t p = 0; p < n_params; ++p)
                acc[p] = TensorF::zeros(result.params.items[p].second.shape());
            for (std::size_t b = 0; b < bs; ++b) {
                epoch_loss += per_sample[b].loss;
                for (std::size_t p = 0; p < n_params; ++p)
                    add_scaled_inplace(acc[p], per_sample[b].grads[p], 1.0f);
            }

            ++step;
            const double warm =
                config.warmup_steps > 0
                    ? std::min(1.0, static_cast<double>(step) / config.warmup_steps)
                    : 1.0;
            const float lr = static_cast<float>(config.lr * warm / static_cast<double>(bs));
            for (std::size_t p = 0; p < n_params; ++p)
                add_scaled_inplace(result.params.items[p].second, acc[p], -lr);
        }
        result.epoch_loss.push_back(epoch_loss / static_cast<double>(n));
    }
    return result;
}

}  // namespace cdk
