#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lowlight/error.hpp"
#include "lowlight/tensor.hpp"

namespace lowlight::img {

// Grayscale raster, row-major doubles nominally in [0,1]. Intermediate
// signal-processing results may leave the range; file writers clamp.
struct GrayImage {
    std::size_t width = 0, height = 0;
    std::vector<double> values;
    int maxval = 255;  // quantization level used when written to disk

    GrayImage() = default;
    GrayImage(std::size_t w, std::size_t h, double fill = 0.0)
        : width(w), height(h), values(w * h, fill) {}
    double& at(std::size_t x, std::size_t y) { return values[y * width + x]; }
    double at(std::size_t x, std::size_t y) const { return values[y * width + x]; }
};

// Interleaved RGB, channels last: values[(y*width + x)*3 + c].
struct RgbImage {
    std::size_t width = 0, height = 0;
    std::vector<double> values;
    int maxval = 255;

    RgbImage() = default;
    RgbImage(std::size_t w, std::size_t h, double fill = 0.0)
        : width(w), height(h), values(w * h * 3, fill) {}
    double& at(std::size_t x, std::size_t y, std::size_t c) {
        return values[(y * width + x) * 3 + c];
    }
    double at(std::size_t x, std::size_t y, std::size_t c) const {
        return values[(y * width + x) * 3 + c];
    }
};

// Raw sensor mosaic; red sits at (even row, even col) when both offsets are 0.
struct BayerImage {
    std::size_t width = 0, height = 0;
    std::vector<std::uint16_t> values;
    int white_level = 255;
    int row_offset = 0;  // shifts the CFA pattern, 0 or 1
    int col_offset = 0;

    BayerImage() = default;
    BayerImage(std::size_t w, std::size_t h) : width(w), height(h), values(w * h, 0) {}
    std::uint16_t& at(std::size_t x, std::size_t y) { return values[y * width + x]; }
    std::uint16_t at(std::size_t x, std::size_t y) const { return values[y * width + x]; }
};

struct ImagePair {
    GrayImage low;
    GrayImage high;
};

enum class AugmentOp { kFlipH, kFlipV, kRot90, kRot180, kRot270 };

GrayImage rgb_to_gray(const RgbImage& img);
RgbImage gray_to_rgb(const GrayImage& img);

GrayImage center_crop(const GrayImage& img, std::size_t size);
RgbImage center_crop(const RgbImage& img, std::size_t size);

GrayImage augment(const GrayImage& img, AugmentOp op);
ImagePair augment(const ImagePair& pair, AugmentOp op);

// PGM (P5) / PPM (P6), binary, 8-bit or 16-bit big-endian samples.
GrayImage read_gray(const std::string& path);
void write_gray(const std::string& path, const GrayImage& img);
RgbImage read_rgb(const std::string& path);
void write_rgb(const std::string& path, const RgbImage& img);
BayerImage read_bayer(const std::string& path);
void write_bayer(const std::string& path, const BayerImage& img);

struct ManifestEntry {
    std::string low_path;
    std::string high_path;
    int stratum = 0;
    std::string exposure;  // e.g. 156us or 1248us
};

std::vector<ManifestEntry> read_manifest(const std::string& path);
void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);

// Bridges to the tensor stack; layout [1,1,H,W].
Tensor to_tensor(const GrayImage& img);
GrayImage gray_from_tensor(const Tensor& t, bool clamp_unit = true);

}  // namespace lowlight::img
