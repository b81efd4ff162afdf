#pragma once

#include <string>
#include <vector>

#include "cdk/prompt.hpp"
#include "cdk/rng.hpp"
#include "cdk/tensor.hpp"

namespace cdk {

struct BlobExample {
    TensorF image;    // [3,R,R] in [-1,1]
    TensorF low_res;  // [3,R/2,R/2]
    PromptSeq prompt;
};

struct BlobDataset {
    int resolution = 8;
    std::vector<BlobExample> items;

    std::size_t size() const { return items.size(); }
};

/// Renders the prompt's blob (color/position/size tokens) on a -1 background.
/// Pixel noise is added when noise_rng is non-null; output stays in [-1,1].
TensorF render_blob(const PromptSeq& prompt, int resolution, RngStream* noise_rng);

/// Synthetic prompted-image dataset: n rendered blobs with aligned prompts
/// and 2x-downsampled low-res copies. resolution must be 8, 16 or 32.
BlobDataset gen_blob_dataset(int n, int resolution, RngStream& rng);

/// Dataset container on disk: one TSR1 file ("images", "low_res") plus a
/// prompts text file, one prompt per line.
void save_blob_dataset(const BlobDataset& ds, const std::string& tsr_path,
                       const std::string& prompts_path);
BlobDataset load_blob_dataset(const std::string& tsr_path, const std::string& prompts_path);

}  // namespace cdk
