#include "lowlight/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace lowlight::img {

namespace {

int clamp_sample(double v, int maxval) {
    const double scaled = std::lround(std::clamp(v, 0.0, 1.0) * maxval);
    return static_cast<int>(std::clamp(scaled, 0.0, double(maxval)));
}

struct PnmHeader {
    char magic = 0;  // '5' or '6'
    std::size_t width = 0, height = 0;
    int maxval = 0;
};

// Header tokens are separated by whitespace; '#' starts a comment to EOL.
// The header ends with exactly one whitespace byte before the raster.
PnmHeader read_pnm_header(std::istream& in, const std::string& path) {
    char p = 0, n = 0;
    in.get(p);
    in.get(n);
    if (!in || p != 'P' || (n != '5' && n != '6'))
        throw DataError(path + ": not a binary PGM/PPM file");
    PnmHeader h;
    h.magic = n;
    std::size_t fields[3] = {0, 0, 0};
    for (int f = 0; f < 3;) {
        int c = in.get();
        if (c == EOF) throw DataError(path + ": truncated header");
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
            continue;
        }
        if (std::isspace(c)) continue;
        if (!std::isdigit(c)) throw DataError(path + ": malformed header");
        std::size_t v = 0;
        while (std::isdigit(c)) {
            v = v * 10 + std::size_t(c - '0');
            c = in.get();
        }
        // the byte after the last digit is the single raster separator
        if (c == EOF || !std::isspace(c)) throw DataError(path + ": malformed header");
        fields[f++] = v;
    }
    h.width = fields[0];
    h.height = fields[1];
    h.maxval = static_cast<int>(fields[2]);
    if (h.width == 0 || h.height == 0) throw DataError(path + ": zero image extent");
    if (h.maxval < 1 || h.maxval > 65535) throw DataError(path + ": maxval out of range");
    return h;
}

std::vector<std::uint16_t> read_samples(std::istream& in, const std::string& path,
                                        std::size_t count, int maxval) {
    std::vector<std::uint16_t> out(count);
    if (maxval > 255) {
        std::vector<unsigned char> raw(count * 2);
        in.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size()));
        if (std::size_t(in.gcount()) != raw.size()) throw DataError(path + ": truncated raster");
        for (std::size_t i = 0; i < count; ++i)
            out[i] = std::uint16_t((raw[2 * i] << 8) | raw[2 * i + 1]);
    } else {
        std::vector<unsigned char> raw(count);
        in.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size()));
        if (std::size_t(in.gcount()) != raw.size()) throw DataError(path + ": truncated raster");
        for (std::size_t i = 0; i < count; ++i) out[i] = raw[i];
    }
    return out;
}

void write_samples(std::ostream& out, const std::vector<std::uint16_t>& samples, int maxval) {
    if (maxval > 255) {
        std::vector<unsigned char> raw(samples.size() * 2);
        for (std::size_t i = 0; i < samples.size(); ++i) {
            raw[2 * i] = (unsigned char)(samples[i] >> 8);
            raw[2 * i + 1] = (unsigned char)(samples[i] & 0xff);
        }
        out.write(reinterpret_cast<const char*>(raw.data()), std::streamsize(raw.size()));
    } else {
        std::vector<unsigned char> raw(samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i) raw[i] = (unsigned char)samples[i];
        out.write(reinterpret_cast<const char*>(raw.data()), std::streamsize(raw.size()));
    }
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError(path + ": cannot open for writing");
    return f;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError(path + ": cannot open for reading");
    return f;
}

}  // namespace

GrayImage rgb_to_gray(const RgbImage& img) {
    GrayImage g(img.width, img.height);
    g.maxval = img.maxval;
    for (std::size_t i = 0; i < g.values.size(); ++i)
        g.values[i] = (img.values[3 * i] + img.values[3 * i + 1] + img.values[3 * i + 2]) / 3.0;
    return g;
}

RgbImage gray_to_rgb(const GrayImage& img) {
    RgbImage rgb(img.width, img.height);
    rgb.maxval = img.maxval;
    for (std::size_t i = 0; i < img.values.size(); ++i)
        rgb.values[3 * i] = rgb.values[3 * i + 1] = rgb.values[3 * i + 2] = img.values[i];
    return rgb;
}

GrayImage center_crop(const GrayImage& img, std::size_t size) {
    if (size > img.width || size > img.height)
        throw ContractError("center_crop: target larger than image");
    const std::size_t x0 = (img.width - size) / 2, y0 = (img.height - size) / 2;
    GrayImage out(size, size);
    out.maxval = img.maxval;
    for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x) out.at(x, y) = img.at(x0 + x, y0 + y);
    return out;
}

RgbImage center_crop(const RgbImage& img, std::size_t size) {
    if (size > img.width || size > img.height)
        throw ContractError("center_crop: target larger than image");
    const std::size_t x0 = (img.width - size) / 2, y0 = (img.height - size) / 2;
    RgbImage out(size, size);
    out.maxval = img.maxval;
    for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x)
            for (std::size_t c = 0; c < 3; ++c) out.at(x, y, c) = img.at(x0 + x, y0 + y, c);
    return out;
}

GrayImage augment(const GrayImage& img, AugmentOp op) {
    const std::size_t w = img.width, h = img.height;
    const bool swaps = (op == AugmentOp::kRot90 || op == AugmentOp::kRot270);
    GrayImage out(swaps ? h : w, swaps ? w : h);
    out.maxval = img.maxval;
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            std::size_t nx = 0, ny = 0;
            switch (op) {
                case AugmentOp::kFlipH: nx = w - 1 - x, ny = y; break;
                case AugmentOp::kFlipV: nx = x, ny = h - 1 - y; break;
                case AugmentOp::kRot180: nx = w - 1 - x, ny = h - 1 - y; break;
                // 90 deg counterclockwise: (x,y) -> (y, w-1-x)
                case AugmentOp::kRot90: nx = y, ny = w - 1 - x; break;
                case AugmentOp::kRot270: nx = h - 1 - y, ny = x; break;
            }
            out.at(nx, ny) = img.at(x, y);
        }
    }
    return out;
}

ImagePair augment(const ImagePair& pair, AugmentOp op) {
    return {augment(pair.low, op), augment(pair.high, op)};
}

GrayImage read_gray(const std::string& path) {
    auto f = open_in(path);
    const PnmHeader h = read_pnm_header(f, path);
    if (h.magic != '5') throw DataError(path + ": expected PGM (P5)");
    auto samples = read_samples(f, path, h.width * h.height, h.maxval);
    GrayImage img(h.width, h.height);
    img.maxval = h.maxval;
    for (std::size_t i = 0; i < samples.size(); ++i)
        img.values[i] = double(samples[i]) / h.maxval;
    return img;
}

void write_gray(const std::string& path, const GrayImage& img) {
    auto f = open_out(path);
    f << "P5\n" << img.width << " " << img.height << "\n" << img.maxval << "\n";
    std::vector<std::uint16_t> samples(img.values.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
        samples[i] = std::uint16_t(clamp_sample(img.values[i], img.maxval));
    write_samples(f, samples, img.maxval);
    if (!f) throw DataError(path + ": write failed");
}

RgbImage read_rgb(const std::string& path) {
    auto f = open_in(path);
    const PnmHeader h = read_pnm_header(f, path);
    if (h.magic != '6') throw DataError(path + ": expected PPM (P6)");
    auto samples = read_samples(f, path, h.width * h.height * 3, h.maxval);
    RgbImage img(h.width, h.height);
    img.maxval = h.maxval;
    for (std::size_t i = 0; i < samples.size(); ++i)
        img.values[i] = double(samples[i]) / h.maxval;
    return img;
}

void write_rgb(const std::string& path, const RgbImage& img) {
    auto f = open_out(path);
    f << "P6\n" << img.width << " " << img.height << "\n" << img.maxval << "\n";
    std::vector<std::uint16_t> samples(img.values.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
        samples[i] = std::uint16_t(clamp_sample(img.values[i], img.maxval));
    write_samples(f, samples, img.maxval);
    if (!f) throw DataError(path + ": write failed");
}

BayerImage read_bayer(const std::string& path) {
    auto f = open_in(path);
    const PnmHeader h = read_pnm_header(f, path);
    if (h.magic != '5') throw DataError(path + ": expected PGM (P5) mosaic");
    BayerImage img(h.width, h.height);
    img.white_level = h.maxval;
    img.values = read_samples(f, path, h.width * h.height, h.maxval);
    return img;
}

void write_bayer(const std::string& path, const BayerImage& img) {
    auto f = open_out(path);
    f << "P5\n" << img.width << " " << img.height << "\n" << img.white_level << "\n";
    write_samples(f, img.values, img.white_level);
    if (!f) throw DataError(path + ": write failed");
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
    auto f = open_in(path);
    std::vector<ManifestEntry> entries;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        ManifestEntry e;
        std::string stratum;
        if (!std::getline(ss, e.low_path, '\t') || !std::getline(ss, e.high_path, '\t') ||
            !std::getline(ss, stratum, '\t') || !std::getline(ss, e.exposure))
            throw DataError(path + ":" + std::to_string(lineno) + ": expected four tab-separated fields");
        try {
            e.stratum = std::stoi(stratum);
        } catch (const std::exception&) {
            throw DataError(path + ":" + std::to_string(lineno) + ": bad stratum id");
        }
        entries.push_back(std::move(e));
    }
    return entries;
}

void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
    auto f = open_out(path);
    for (const auto& e : entries)
        f << e.low_path << '\t' << e.high_path << '\t' << e.stratum << '\t' << e.exposure << '\n';
    if (!f) throw DataError(path + ": write failed");
}

Tensor to_tensor(const GrayImage& img) {
    Tensor t = Tensor::zeros({1, 1, img.height, img.width});
    std::copy(img.values.begin(), img.values.end(), t.values().begin());
    return t;
}

GrayImage gray_from_tensor(const Tensor& t, bool clamp_unit) {
    if (t.rank() != 4 || t.shape()[0] != 1 || t.shape()[1] != 1)
        throw DimensionError("gray_from_tensor: expected [1,1,H,W]");
    GrayImage img(t.shape()[3], t.shape()[2]);
    for (std::size_t i = 0; i < img.values.size(); ++i)
        img.values[i] = clamp_unit ? std::clamp(t[i], 0.0, 1.0) : t[i];
    return img;
}

}  // namespace lowlight::img
