#pragma once

// Finite-difference gradient checking for the toy U-Net: the oracle behind
// the grad-check CLI subcommand and the gradient tests. The FD loss is
// recomputed from float forward passes but reduced in double, so the
// comparison floor is the float32 forward noise.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cdk/unet.hpp"

namespace cdk::gradcheck {

struct Report {
    std::string group;
    double max_rel_err = 0.0;
    int probed = 0;
};

inline double loss_eval(const ToyUNet& net, const ParamSet& params,
                        const TensorF& z, const NoiseLevel& level,
                        const PromptEmbedding& cond, double aug,
                        const TensorF& target) {
    const TensorF out = net.forward(params, z, level, cond, aug);
    double acc = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double d = static_cast<double>(out[i]) - static_cast<double>(target[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(out.size());
}

/// Checks reverse-mode gradients against central finite differences
/// (step 1e-3, float32 forward) for the `probes` parameters with the largest
/// analytic gradient magnitude whose name matches `match` (prefix "" matches
/// everything; otherwise substring match).
inline Report check(const ToyUNet& net, ParamSet& params, const TensorF& z,
                    const NoiseLevel& level, const PromptEmbedding& cond, double aug,
                    const TensorF& target, const std::string& match, int probes,
                    const std::string& group_name) {
    const float h = 1e-3f;

    Tape tape;
    const auto vars = net.bind(tape, params, true);
    const int out = net.build(tape, vars, z, level, cond, aug);
    const int loss = tape.mse(out, target);
    tape.backward(loss);

    struct Probe {
        std::size_t param = 0;
        std::size_t flat = 0;
        double analytic = 0.0;
    };
    std::vector<Probe> candidates;
    for (std::size_t p = 0; p < params.items.size(); ++p) {
        const auto& [name, tensor] = params.items[p];
        if (!match.empty() && name.find(match) == std::string::npos) continue;
        const TensorF& g = tape.grad(vars.at(name));
        for (std::size_t i = 0; i < g.size(); ++i)
            candidates.push_back({p, i, static_cast<double>(g[i])});
    }
    std::sort(candidates.begin(), candidates.end(), [](const Probe& a, const Probe& b) {
        return std::fabs(a.analytic) > std::fabs(b.analytic);
    });
    const int n = std::min<int>(probes, static_cast<int>(candidates.size()));

    Report report;
    report.group = group_name;
    report.probed = n;
    for (int i = 0; i < n; ++i) {
        const Probe& pr = candidates[static_cast<std::size_t>(i)];
        float& theta = params.items[pr.param].second[pr.flat];
        const float saved = theta;
        theta = saved + h;
        const double up = loss_eval(net, params, z, level, cond, aug, target);
        theta = saved - h;
        const double down = loss_eval(net, params, z, level, cond, aug, target);
        theta = saved;
        const double fd = (up - down) / (2.0 * static_cast<double>(h));
        const double rel = std::fabs(pr.analytic - fd) / (std::fabs(fd) + 1e-6);
        report.max_rel_err = std::max(report.max_rel_err, rel);
    }
    return report;
}

}  // namespace cdk::gradcheck
