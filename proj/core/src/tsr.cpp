#include "cdk/tsr.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <unordered_set>

#include "cdk/errors.hpp"

static_assert(sizeof(float) == 4, "TSR1 requires 32-bit floats");

namespace cdk {

namespace {

constexpr char kMagic[4] = {'T', 'S', 'R', '1'};
constexpr std::uint16_t kVersion = 1;

template <typename T>
T to_le(T v) {
    if constexpr (std::endian::native == std::endian::little) {
        return v;
    } else {
        T out = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i)
            out |= ((v >> (8 * i)) & 0xFF) << (8 * (sizeof(T) - 1 - i));
        return out;
    }
}

void write_u16(std::ostream& os, std::uint16_t v) {
    v = to_le(v);
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_u32(std::ostream& os, std::uint32_t v) {
    v = to_le(v);
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint16_t read_u16(std::istream& is) {
    std::uint16_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return to_le(v);
}

std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return to_le(v);
}

void write_f32_block(std::ostream& os, const float* data, std::size_t n) {
    if constexpr (std::endian::native == std::endian::little) {
        os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * 4));
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            std::uint32_t bits;
            std::memcpy(&bits, &data[i], 4);
            write_u32(os, bits);
        }
    }
}

void read_f32_block(std::istream& is, float* data, std::size_t n) {
    if constexpr (std::endian::native == std::endian::little) {
        is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * 4));
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint32_t bits = read_u32(is);
            std::memcpy(&data[i], &bits, 4);
        }
    }
}

}  // namespace

void save_tsr(const std::string& path, const std::vector<NamedTensor>& tensors) {
    std::unordered_set<std::string> seen;
    for (const auto& [name, t] : tensors) {
        if (name.empty()) throw NumericError("tsr: empty tensor name");
        if (!seen.insert(name).second) throw NumericError("tsr: duplicate tensor name " + name);
        if (t.rank() == 0) throw NumericError("tsr: rank-0 tensor " + name);
    }
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw NumericError("tsr: cannot open " + tmp);
        os.write(kMagic, 4);
        write_u16(os, kVersion);
        write_u32(os, static_cast<std::uint32_t>(tensors.size()));
        for (const auto& [name, t] : tensors) {
            write_u32(os, static_cast<std::uint32_t>(name.size()));
            os.write(name.data(), static_cast<std::streamsize>(name.size()));
        }
        for (const auto& [name, t] : tensors) {
            write_u32(os, static_cast<std::uint32_t>(t.rank()));
            for (int i = 0; i < t.rank(); ++i) write_u32(os, static_cast<std::uint32_t>(t.dim(i)));
            write_f32_block(os, t.data(), t.size());
        }
        if (!os) throw NumericError("tsr: write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

std::vector<NamedTensor> load_tsr(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw NumericError("tsr: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw NumericError("tsr: bad magic in " + path);
    if (read_u16(is) != kVersion) throw NumericError("tsr: unsupported version in " + path);
    const std::uint32_t count = read_u32(is);
    std::vector<std::string> names(count);
    std::unordered_set<std::string> seen;
    for (auto& name : names) {
        const std::uint32_t len = read_u32(is);
        name.resize(len);
        is.read(name.data(), len);
        if (!is || !seen.insert(name).second)
            throw NumericError("tsr: corrupt or duplicate name table in " + path);
    }
    std::vector<NamedTensor> out;
    out.reserve(count);
    for (const auto& name : names) {
        const std::uint32_t rank = read_u32(is);
        if (rank == 0 || rank > 8) throw NumericError("tsr: bad rank for " + name);
        std::vector<int> shape(rank);
        std::size_t n = 1;
        for (auto& d : shape) {
            d = static_cast<int>(read_u32(is));
            if (d <= 0) throw NumericError("tsr: bad dim for " + name);
            n *= static_cast<std::size_t>(d);
        }
        TensorF t(shape);
        read_f32_block(is, t.data(), n);
        if (!is) throw NumericError("tsr: truncated payload for " + name);
        out.emplace_back(name, std::move(t));
    }
    return out;
}

}  // namespace cdk
