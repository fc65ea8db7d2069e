#pragma once

#include "lowlight/image.hpp"

namespace lowlight::img {

// Bilinear CFA interpolation. Each output channel is the site value itself or
// the mean of the 2 or 4 nearest same-color neighbors; borders use mirror
// padding (index -1 maps to 1) which preserves CFA parity.
RgbImage demosaic_bilinear(const BayerImage& b);

// Test-oracle inverse: keeps one channel per site according to the CFA layout.
BayerImage mosaic(const RgbImage& img, int white_level = 255, int row_offset = 0,
                  int col_offset = 0);

}  // namespace lowlight::img
