#include "lowlight/demosaic.hpp"

#include <algorithm>
#include <cmath>

namespace lowlight::img {

namespace {

// mirror-without-repeat: -1 -> 1, n -> n-2
std::size_t reflect(long i, long n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
    return std::size_t(i);
}

}  // namespace

RgbImage demosaic_bilinear(const BayerImage& b) {
    if (b.width % 2 != 0 || b.height % 2 != 0)
        throw ContractError("demosaic_bilinear: image extents must be even");
    if (b.width < 2 || b.height < 2)
        throw ContractError("demosaic_bilinear: image too small");

    const long w = long(b.width), h = long(b.height);
    auto raw = [&](long x, long y) -> double {
        return double(b.values[reflect(y, h) * b.width + reflect(x, w)]);
    };
    auto cross4 = [&](long x, long y) {
        return (raw(x - 1, y) + raw(x + 1, y) + raw(x, y - 1) + raw(x, y + 1)) / 4.0;
    };
    auto diag4 = [&](long x, long y) {
        return (raw(x - 1, y - 1) + raw(x + 1, y - 1) + raw(x - 1, y + 1) + raw(x + 1, y + 1)) /
               4.0;
    };
    auto horiz2 = [&](long x, long y) { return (raw(x - 1, y) + raw(x + 1, y)) / 2.0; };
    auto vert2 = [&](long x, long y) { return (raw(x, y - 1) + raw(x, y + 1)) / 2.0; };

    RgbImage out(b.width, b.height);
    out.maxval = b.white_level;
    // divide rather than multiply by a reciprocal: neighbor sums and the
    // power-of-two count are exact, so one correctly rounded division makes
    // the result independent of accumulation order
    const double white = double(b.white_level);
    for (long y = 0; y < h; ++y) {
        for (long x = 0; x < w; ++x) {
            const bool even_row = ((y + b.row_offset) % 2) == 0;
            const bool even_col = ((x + b.col_offset) % 2) == 0;
            double r, g, bl;
            if (even_row && even_col) {  // red site
                r = raw(x, y);
                g = cross4(x, y);
                bl = diag4(x, y);
            } else if (!even_row && !even_col) {  // blue site
                bl = raw(x, y);
                g = cross4(x, y);
                r = diag4(x, y);
            } else if (even_row) {  // green in a red row
                g = raw(x, y);
                r = horiz2(x, y);
                bl = vert2(x, y);
            } else {  // green in a blue row
                g = raw(x, y);
                r = vert2(x, y);
                bl = horiz2(x, y);
            }
            out.at(std::size_t(x), std::size_t(y), 0) = r / white;
            out.at(std::size_t(x), std::size_t(y), 1) = g / white;
            out.at(std::size_t(x), std::size_t(y), 2) = bl / white;
        }
    }
    return out;
}

BayerImage mosaic(const RgbImage& img, int white_level, int row_offset, int col_offset) {
    BayerImage out(img.width, img.height);
    out.white_level = white_level;
    out.row_offset = row_offset;
    out.col_offset = col_offset;
    for (std::size_t y = 0; y < img.height; ++y) {
        for (std::size_t x = 0; x < img.width; ++x) {
            const bool even_row = ((y + std::size_t(row_offset)) % 2) == 0;
            const bool even_col = ((x + std::size_t(col_offset)) % 2) == 0;
            std::size_t c;
            if (even_row && even_col)
                c = 0;
            else if (!even_row && !even_col)
                c = 2;
            else
                c = 1;
            const double v = std::clamp(img.at(x, y, c), 0.0, 1.0);
            out.at(x, y) = std::uint16_t(std::lround(v * white_level));
        }
    }
    return out;
}

}  // namespace lowlight::img
