#include "cdk/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "cdk/errors.hpp"

namespace cdk {

void save_image_pnm(const TensorF& image, const std::string& path) {
    if (image.rank() != 3 || (image.dim(0) != 1 && image.dim(0) != 3))
        throw std::invalid_argument("save_image_pnm: want [1,H,W] or [3,H,W]");
    const int C = image.dim(0), H = image.dim(1), W = image.dim(2);

    std::vector<unsigned char> pixels(static_cast<std::size_t>(H) * W * C);
    std::size_t k = 0;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < C; ++c) {
                const float v = std::clamp(image.at(c, y, x), -1.0f, 1.0f);
                pixels[k++] =
                    static_cast<unsigned char>(std::floor((v + 1.0f) / 2.0f * 255.0f + 0.5f));
            }

    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw NumericError("save_image_pnm: cannot open " + tmp);
        os << (C == 1 ? "P5" : "P6") << "\n" << W << " " << H << "\n255\n";
        os.write(reinterpret_cast<const char*>(pixels.data()),
                 static_cast<std::streamsize>(pixels.size()));
        if (!os) throw NumericError("save_image_pnm: write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace cdk
