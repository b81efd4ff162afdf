#include "cdk/sweep.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "cdk/errors.hpp"
#include "cdk/features.hpp"
#include "cdk/metrics.hpp"
#include "cdk/parallel.hpp"

namespace cdk {

const std::vector<double>& default_sweep_weights() {
    static const std::vector<double> weights = {1,    1.25, 1.5, 1.75, 2, 3, 4,
                                                5,    6,    7,   8,    9, 10};
    return weights;
}

std::vector<SweepRow> guidance_sweep(const SweepSampleFn& sample_fn,
                                     const std::vector<double>& weights, int n,
                                     const std::vector<std::vector<double>>& reference_features,
                                     const std::vector<PromptSeq>& prompts,
                                     const PromptEncoder& encoder) {
    if (weights.empty()) throw std::invalid_argument("sweep: no weights");
    if (n < 32) throw std::invalid_argument("sweep: need n >= 32 samples per weight");
    if (reference_features.empty()) throw std::invalid_argument("sweep: empty reference set");
    if (prompts.empty()) throw std::invalid_argument("sweep: no prompts");

    const GaussianFit ref_fit = fit_gaussian(reference_features);

    std::vector<double> sorted = weights;
    std::sort(sorted.begin(), sorted.end());

    std::vector<SweepRow> rows;
    rows.reserve(sorted.size());
    for (std::size_t wi = 0; wi < sorted.size(); ++wi) {
        const double w = sorted[wi];
        std::vector<std::vector<double>> feats(static_cast<std::size_t>(n));
        std::vector<double> aligns(static_cast<std::size_t>(n));
        parallel_for(static_cast<std::size_t>(n), [&](std::size_t j) {
            const PromptSeq& prompt = prompts[j % prompts.size()];
            const std::uint64_t chain = wi * static_cast<std::uint64_t>(n) + j;
            const TensorF image = sample_fn(w, prompt, chain);
            if (!image.all_finite()) throw NumericError("sweep: non-finite sample");
            feats[j] = image_features(image);
            aligns[j] = alignment_score(image, prompt, encoder);
        });
        SweepRow row;
        row.w = w;
        row.n = n;
        row.fid_toy = frechet_distance(fit_gaussian(feats), ref_fit);
        for (double a : aligns) row.align_toy += a / n;
        rows.push_back(row);
    }
    return rows;
}

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::trunc);
        if (!os) throw NumericError("sweep: cannot write " + tmp);
        os << "w,fid_toy,align_toy,n\n";
        char buf[160];
        for (const auto& r : rows) {
            std::snprintf(buf, sizeof buf, "%g,%.6f,%.6f,%d\n", r.w, r.fid_toy, r.align_toy, r.n);
            os << buf;
        }
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace cdk
