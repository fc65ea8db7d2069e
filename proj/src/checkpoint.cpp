#include "lowlight/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace lowlight {

namespace {

constexpr char kMagic[8] = {'L', 'O', 'W', 'L', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double v) {
    put_u64(os, std::bit_cast<std::uint64_t>(v));
}

bool get_u32(std::istream& is, std::uint32_t& v) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
    v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return true;
}

bool get_u64(std::istream& is, std::uint64_t& v) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) return false;
    v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return true;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamMap& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("save_checkpoint: cannot open " + path);
    os.write(kMagic, sizeof(kMagic));
    put_u32(os, kVersion);
    for (const auto& [name, tensor] : params) {
        put_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(os, static_cast<std::uint32_t>(tensor.rank()));
        for (std::size_t e : tensor.shape()) put_u64(os, e);
        for (double v : tensor.values()) put_f64(os, v);
    }
    if (!os) throw DataError("save_checkpoint: write failed for " + path);
}

ParamMap load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("load_checkpoint: cannot open " + path);
    char magic[8];
    if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw DataError("load_checkpoint: bad magic in " + path);
    std::uint32_t version = 0;
    if (!get_u32(is, version) || version != kVersion)
        throw DataError("load_checkpoint: unsupported version in " + path);

    ParamMap params;
    for (;;) {
        std::uint32_t name_len = 0;
        if (!get_u32(is, name_len)) break;  // clean EOF
        std::string name(name_len, '\0');
        if (!is.read(name.data(), name_len))
            throw DataError("load_checkpoint: truncated name in " + path);
        std::uint32_t rank = 0;
        if (!get_u32(is, rank)) throw DataError("load_checkpoint: truncated rank in " + path);
        std::vector<std::size_t> shape(rank);
        std::size_t count = 1;
        for (std::uint32_t i = 0; i < rank; ++i) {
            std::uint64_t e = 0;
            if (!get_u64(is, e)) throw DataError("load_checkpoint: truncated shape in " + path);
            shape[i] = static_cast<std::size_t>(e);
            count *= shape[i];
        }
        std::vector<double> values(count);
        for (std::size_t i = 0; i < count; ++i) {
            std::uint64_t bits = 0;
            if (!get_u64(is, bits))
                throw DataError("load_checkpoint: truncated payload in " + path);
            values[i] = std::bit_cast<double>(bits);
        }
        params.emplace(std::move(name), Tensor::from(std::move(shape), std::move(values)));
    }
    return params;
}

}  // namespace lowlight
