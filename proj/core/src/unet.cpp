#include "cdk/unet.hpp"

#include <cmath>
#include <stdexcept>

namespace cdk {

namespace {
int group_count(int channels) { return std::min(8, channels); }

std::string stage_name(bool encoder, int i) {
    return (encoder ? "enc" : "dec") + std::to_string(i);
}
}  // namespace

void ToyUNetConfig::validate() const {
    if (stages.empty()) throw std::invalid_argument("unet: no stages");
    if (emb_dim < 2 || emb_dim % 2 != 0)
        throw std::invalid_argument("unet: emb_dim must be even and >= 2");
    if (in_channels < 1 || out_channels < 1)
        throw std::invalid_argument("unet: channel counts must be positive");
    for (std::size_t i = 0; i < stages.size(); ++i) {
        const StageSpec& st = stages[i];
        if (st.channels < 1 || st.num_res_blocks < 1)
            throw std::invalid_argument("unet: stage channels/blocks must be positive");
        if (st.stride != 1 && st.stride != 2)
            throw std::invalid_argument("unet: stage stride must be 1 or 2");
        if (i > 0 && st.channels < stages[i - 1].channels)
            throw std::invalid_argument("unet: channels must not decrease toward low resolution");
        if ((st.self_attention || st.cross_attention) && st.channels % attn_heads != 0)
            throw std::invalid_argument("unet: attention channels must divide heads");
    }
    if (stages.back().num_res_blocks < stages.front().num_res_blocks)
        throw std::invalid_argument(
            "unet: lowest resolution must have at least as many res blocks as the highest");
}

ToyUNetConfig ToyUNetConfig::base_default() {
    ToyUNetConfig cfg;
    cfg.stages = {
        {16, 1, 1, false, false},
        {32, 2, 2, true, true},
    };
    cfg.cond_mode = CondMode::CrossAttention;
    cfg.in_channels = 3;
    cfg.out_channels = 3;
    cfg.emb_dim = 32;
    cfg.attn_heads = 2;
    cfg.sr_conditioned = false;
    return cfg;
}

ToyUNetConfig ToyUNetConfig::sr_default() {
    ToyUNetConfig cfg = base_default();
    cfg.in_channels = 6;  // latent + upsampled low-res conditioner
    cfg.sr_conditioned = true;
    return cfg;
}

void ParamSet::add(std::string name, TensorF t) { items.emplace_back(std::move(name), std::move(t)); }

const TensorF* ParamSet::find(const std::string& name) const {
    for (const auto& [n, t] : items)
        if (n == name) return &t;
    return nullptr;
}

TensorF* ParamSet::find(const std::string& name) {
    for (auto& [n, t] : items)
        if (n == name) return &t;
    return nullptr;
}

std::size_t ParamSet::total_size() const {
    std::size_t n = 0;
    for (const auto& [name, t] : items) n += t.size();
    return n;
}

TensorF sinusoid_embedding(double u, int dim) {
    const int half = dim / 2;
    TensorF out({dim});
    for (int k = 0; k < half; ++k) {
        const double freq = std::exp(-std::log(10000.0) * k / half);
        const double angle = u * 1000.0 * freq;
        out[static_cast<std::size_t>(k)] = static_cast<float>(std::sin(angle));
        out[static_cast<std::size_t>(half + k)] = static_cast<float>(std::cos(angle));
    }
    return out;
}

TensorF concat_channels(const TensorF& a, const TensorF& b) {
    if (a.rank() != 3 || b.rank() != 3 || a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2))
        throw std::invalid_argument("concat_channels: spatial shapes must match");
    TensorF out({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)});
    std::size_t off = 0;
    for (std::size_t i = 0; i < a.size(); ++i) out[off++] = a[i];
    for (std::size_t i = 0; i < b.size(); ++i) out[off++] = b[i];
    return out;
}

int BuildProbes::find(const std::string& name) const {
    for (const auto& [n, id] : nodes)
        if (n == name) return id;
    throw std::invalid_argument("probes: no node named " + name);
}

ToyUNet::ToyUNet(ToyUNetConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

std::vector<ToyUNet::ParamSpec> ToyUNet::param_specs() const {
    using Init = ParamSpec::Init;
    std::vector<ParamSpec> specs;
    const int E = cfg_.emb_dim;
    const int D = PromptEncoder::kEmbedDim;

    specs.push_back({"emb.time.w1", {E, E}, Init::Linear});
    specs.push_back({"emb.time.b1", {E}, Init::Zeros});
    specs.push_back({"emb.time.w2", {E, E}, Init::Linear});
    specs.push_back({"emb.time.b2", {E}, Init::Zeros});
    specs.push_back({"emb.pool.w", {D, E}, Init::Linear});
    specs.push_back({"emb.pool.b", {E}, Init::Zeros});
    if (cfg_.sr_conditioned) {
        specs.push_back({"emb.aug.w", {E, E}, Init::Linear});
        specs.push_back({"emb.aug.b", {E}, Init::Zeros});
    }

    const int ch0 = cfg_.stages.front().channels;
    specs.push_back({"stem.w", {ch0, cfg_.in_channels, 3, 3}, Init::HeConv});
    specs.push_back({"stem.b", {ch0}, Init::Zeros});

    auto block_specs = [&](bool encoder, int i) {
        const StageSpec& st = cfg_.stages[static_cast<std::size_t>(i)];
        const std::string p = stage_name(encoder, i) + ".";
        const int ch = st.channels;
        const int prev = i == 0 ? ch0 : cfg_.stages[static_cast<std::size_t>(i - 1)].channels;
        if (encoder) {
            specs.push_back({p + "down.w", {ch, prev, 3, 3}, Init::HeConv});
            specs.push_back({p + "down.b", {ch}, Init::Zeros});
        }
        specs.push_back({p + "emb.w", {E, ch}, Init::Linear});
        specs.push_back({p + "emb.b", {ch}, Init::Zeros});
        for (int r = 0; r < st.num_res_blocks; ++r) {
            const std::string rp = p + "res" + std::to_string(r) + ".";
            specs.push_back({rp + "gn1.gamma", {ch}, Init::Ones});
            specs.push_back({rp + "gn1.beta", {ch}, Init::Zeros});
            specs.push_back({rp + "conv1.w", {ch, ch, 3, 3}, Init::HeConv});
            specs.push_back({rp + "conv1.b", {ch}, Init::Zeros});
            specs.push_back({rp + "gn2.gamma", {ch}, Init::Ones});
            specs.push_back({rp + "gn2.beta", {ch}, Init::Zeros});
            specs.push_back({rp + "conv2.w", {ch, ch, 3, 3}, Init::HeConv});
            specs.push_back({rp + "conv2.b", {ch}, Init::Zeros});
            specs.push_back({rp + "skip.w", {ch, ch, 1, 1}, Init::HeConv});
            specs.push_back({rp + "skip.b", {ch}, Init::Zeros});
        }
        const int dh = ch / cfg_.attn_heads;
        if (st.self_attention) {
            specs.push_back({p + "sattn.gn.gamma", {ch}, Init::Ones});
            specs.push_back({p + "sattn.gn.beta", {ch}, Init::Zeros});
            for (int h = 0; h < cfg_.attn_heads; ++h) {
                const std::string hp = p + "sattn.h" + std::to_string(h) + ".";
                specs.push_back({hp + "wq", {ch, dh}, Init::Linear});
                specs.push_back({hp + "wk", {ch, dh}, Init::Linear});
                specs.push_back({hp + "wv", {ch, dh}, Init::Linear});
                specs.push_back({hp + "wo", {dh, ch}, Init::Linear});
            }
            specs.push_back({p + "sattn.bo", {ch}, Init::Zeros});
        }
        if (st.cross_attention && cfg_.cond_mode == CondMode::CrossAttention) {
            specs.push_back({p + "xattn.gn.gamma", {ch}, Init::Ones});
            specs.push_back({p + "xattn.gn.beta", {ch}, Init::Zeros});
            for (int h = 0; h < cfg_.attn_heads; ++h) {
                const std::string hp = p + "xattn.h" + std::to_string(h) + ".";
                specs.push_back({hp + "wq", {ch, dh}, Init::Linear});
                specs.push_back({hp + "wk", {D, dh}, Init::Linear});
                specs.push_back({hp + "wv", {D, dh}, Init::Linear});
                specs.push_back({hp + "wo", {dh, ch}, Init::Linear});
            }
            specs.push_back({p + "xattn.bo", {ch}, Init::Zeros});
        }
        if (!encoder && st.stride > 1) {
            specs.push_back({p + "up.w", {prev, ch, 3, 3}, Init::HeConv});
            specs.push_back({p + "up.b", {prev}, Init::Zeros});
        }
    };

    const int K = static_cast<int>(cfg_.stages.size());
    for (int i = 0; i < K; ++i) block_specs(true, i);
    for (int i = K - 1; i >= 0; --i) block_specs(false, i);

    specs.push_back({"out.gn.gamma", {ch0}, Init::Ones});
    specs.push_back({"out.gn.beta", {ch0}, Init::Zeros});
    specs.push_back({"out.w", {cfg_.out_channels, ch0, 1, 1}, Init::Zeros});
    specs.push_back({"out.b", {cfg_.out_channels}, Init::Zeros});
    return specs;
}

ParamSet ToyUNet::init_params(RngStream& rng) const {
    using Init = ParamSpec::Init;
    ParamSet out;
    for (const auto& spec : param_specs()) {
        TensorF t(spec.shape);
        switch (spec.init) {
            case Init::Zeros:
                break;
            case Init::Ones:
                for (std::size_t i = 0; i < t.size(); ++i) t[i] = 1.0f;
                break;
            case Init::HeConv: {
                const int fan_in = spec.shape[1] * spec.shape[2] * spec.shape[3];
                const float sd = std::sqrt(2.0f / static_cast<float>(fan_in));
                for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal_f() * sd;
                break;
            }
            case Init::Linear: {
                const float sd = 1.0f / std::sqrt(static_cast<float>(spec.shape[0]));
                for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal_f() * sd;
                break;
            }
        }
        out.add(spec.name, std::move(t));
    }
    return out;
}

std::unordered_map<std::string, int> ToyUNet::bind(Tape& tape, const ParamSet& params,
                                                   bool needs_grad) const {
    std::unordered_map<std::string, int> vars;
    vars.reserve(params.items.size());
    for (const auto& [name, t] : params.items) vars.emplace(name, tape.leaf(t, needs_grad));
    return vars;
}

namespace {
int lookup(const std::unordered_map<std::string, int>& vars, const std::string& name) {
    const auto it = vars.find(name);
    if (it == vars.end()) throw std::invalid_argument("unet: missing parameter " + name);
    return it->second;
}
}  // namespace

int ToyUNet::build(Tape& tape, const std::unordered_map<std::string, int>& vars,
                   const TensorF& z_in, const NoiseLevel& level, const PromptEmbedding& cond,
                   double aug, BuildProbes* probes) const {
    if (z_in.rank() != 3 || z_in.dim(0) != cfg_.in_channels)
        throw std::invalid_argument("unet: input must be [" + std::to_string(cfg_.in_channels) +
                                    ",H,W], got " + z_in.shape_str());

    auto var = [&](const std::string& n) { return lookup(vars, n); };
    auto probe = [&](const std::string& n, int id) {
        if (probes) probes->nodes.emplace_back(n, id);
    };

    // Conditioning vector: time MLP + pooled prompt projection (+ aug pathway).
    int e = tape.leaf(sinusoid_embedding(level.t, cfg_.emb_dim));
    e = tape.linear(e, var("emb.time.w1"), var("emb.time.b1"));
    e = tape.swish(e);
    e = tape.linear(e, var("emb.time.w2"), var("emb.time.b2"));
    {
        const int p = tape.leaf(cond.pooled);
        e = tape.add(e, tape.linear(p, var("emb.pool.w"), var("emb.pool.b")));
    }
    if (cfg_.sr_conditioned) {
        const int a = tape.leaf(sinusoid_embedding(aug, cfg_.emb_dim));
        e = tape.add(e, tape.linear(a, var("emb.aug.w"), var("emb.aug.b")));
    }

    // Prompt sequence and pad mask, used by cross-attention stages.
    int seq = -1;
    TensorF mask({PromptEncoder::kMaxLen});
    if (cfg_.cond_mode == CondMode::CrossAttention) {
        seq = tape.leaf(cond.seq);
        for (int i = 0; i < PromptEncoder::kMaxLen; ++i)
            mask[static_cast<std::size_t>(i)] = i < cond.n_tokens ? 0.0f : -1e9f;
    }

    auto res_block = [&](int h, const std::string& rp, int ch) {
        const int groups = group_count(ch);
        int a = tape.group_norm(h, var(rp + "gn1.gamma"), var(rp + "gn1.beta"), groups);
        a = tape.swish(a);
        a = tape.conv2d(a, var(rp + "conv1.w"), var(rp + "conv1.b"), 1, 1);
        a = tape.group_norm(a, var(rp + "gn2.gamma"), var(rp + "gn2.beta"), groups);
        a = tape.swish(a);
        a = tape.conv2d(a, var(rp + "conv2.w"), var(rp + "conv2.b"), 1, 1);
        const int skip = tape.conv2d(h, var(rp + "skip.w"), var(rp + "skip.b"), 1, 0);
        return tape.add(a, skip);
    };

    auto attention = [&](int h, const std::string& ap, int ch, bool cross) {
        const int H = tape.value(h).dim(1), W = tape.value(h).dim(2);
        const int dh = ch / cfg_.attn_heads;
        const float inv_sqrt_dh = 1.0f / std::sqrt(static_cast<float>(dh));
        const int groups = group_count(ch);
        int x = tape.group_norm(h, var(ap + "gn.gamma"), var(ap + "gn.beta"), groups);
        const int tok = tape.transpose(tape.reshape(x, {ch, H * W}));  // [HW, C]
        int out_tok = -1;
        for (int head = 0; head < cfg_.attn_heads; ++head) {
            const std::string hp = ap + "h" + std::to_string(head) + ".";
            const int q = tape.matmul(tok, var(hp + "wq"));
            const int kv_src = cross ? seq : tok;
            const int k = tape.matmul(kv_src, var(hp + "wk"));
            const int v = tape.matmul(kv_src, var(hp + "wv"));
            int logits = tape.scale(tape.matmul(q, tape.transpose(k)), inv_sqrt_dh);
            if (cross) logits = tape.add_row_const(logits, mask);
            const int attn = tape.softmax_rows(logits);
            const int o = tape.matmul(tape.matmul(attn, v), var(hp + "wo"));
            out_tok = head == 0 ? o : tape.add(out_tok, o);
        }
        out_tok = tape.add_col_bias(out_tok, var(ap + "bo"));
        const int spatial = tape.reshape(tape.transpose(out_tok), {ch, H, W});
        return tape.add(h, spatial);
    };

    auto combine_embs = [&](int h, const std::string& p) {
        const int proj = tape.linear(e, var(p + "emb.w"), var(p + "emb.b"));
        return tape.add_channel_bias(h, proj);
    };

    const int K = static_cast<int>(cfg_.stages.size());
    int h = tape.conv2d(tape.leaf(z_in), var("stem.w"), var("stem.b"), 1, 1);

    std::vector<int> enc_out(static_cast<std::size_t>(K));
    for (int i = 0; i < K; ++i) {
        const StageSpec& st = cfg_.stages[static_cast<std::size_t>(i)];
        const std::string p = stage_name(true, i) + ".";
        h = tape.conv2d(h, var(p + "down.w"), var(p + "down.b"), st.stride, 1);
        h = combine_embs(h, p);
        for (int r = 0; r < st.num_res_blocks; ++r)
            h = res_block(h, p + "res" + std::to_string(r) + ".", st.channels);
        if (st.self_attention) h = attention(h, p + "sattn.", st.channels, false);
        if (st.cross_attention && cfg_.cond_mode == CondMode::CrossAttention)
            h = attention(h, p + "xattn.", st.channels, true);
        enc_out[static_cast<std::size_t>(i)] = h;
        probe("enc" + std::to_string(i) + ".out", h);
    }

    for (int i = K - 1; i >= 0; --i) {
        const StageSpec& st = cfg_.stages[static_cast<std::size_t>(i)];
        const std::string p = stage_name(false, i) + ".";
        if (i < K - 1) {
            h = tape.add(h, tape.scale(enc_out[static_cast<std::size_t>(i)], cfg_.skip_scale));
            probe("dec" + std::to_string(i) + ".skip_add", h);
        }
        h = combine_embs(h, p);
        for (int r = 0; r < st.num_res_blocks; ++r)
            h = res_block(h, p + "res" + std::to_string(r) + ".", st.channels);
        if (st.self_attention) h = attention(h, p + "sattn.", st.channels, false);
        if (st.cross_attention && cfg_.cond_mode == CondMode::CrossAttention)
            h = attention(h, p + "xattn.", st.channels, true);
        if (st.stride > 1) {
            h = tape.upsample_nearest(h, st.stride);
            h = tape.conv2d(h, var(p + "up.w"), var(p + "up.b"), 1, 1);
        }
    }

    const int ch0 = cfg_.stages.front().channels;
    h = tape.group_norm(h, var("out.gn.gamma"), var("out.gn.beta"), group_count(ch0));
    h = tape.swish(h);
    h = tape.conv2d(h, var("out.w"), var("out.b"), 1, 0);
    probe("out", h);
    return h;
}

TensorF ToyUNet::forward(const ParamSet& params, const TensorF& z_in, const NoiseLevel& level,
                         const PromptEmbedding& cond, double aug) const {
    Tape tape;
    const auto vars = bind(tape, params, false);
    const int out = build(tape, vars, z_in, level, cond, aug);
    return tape.value(out);
}

std::size_t ToyUNet::stage_param_count(const ParamSet& params, int stage) const {
    const std::string enc = stage_name(true, stage) + ".";
    const std::string dec = stage_name(false, stage) + ".";
    std::size_t n = 0;
    for (const auto& [name, t] : params.items)
        if (name.rfind(enc, 0) == 0 || name.rfind(dec, 0) == 0) n += t.size();
    return n;
}

UNetDenoiser::UNetDenoiser(const ToyUNet& net, const ParamSet& params)
    : net_(net), params_(params) {}

UNetDenoiser::UNetDenoiser(const ToyUNet& net, const ParamSet& params, TensorF lr_cond, double aug)
    : net_(net), params_(params), lr_cond_(std::move(lr_cond)), has_lr_(true), aug_(aug) {}

TensorF UNetDenoiser::eps_hat(const TensorF& z_t, const NoiseLevel& level,
                              const PromptEmbedding& cond) const {
    if (has_lr_) return net_.forward(params_, concat_channels(z_t, lr_cond_), level, cond, aug_);
    return net_.forward(params_, z_t, level, cond, 0.0);
}

}  // namespace cdk
