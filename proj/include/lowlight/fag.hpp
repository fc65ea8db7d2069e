#pragma once

#include "lowlight/fft.hpp"
#include "lowlight/image.hpp"

namespace lowlight::spectral {

using GuidanceMap = img::GrayImage;

// Ideal (brick-wall) high-pass: 0 where the radial distance of the signed
// integer frequency pair is <= cutoff, 1 elsewhere; the DC bin is always 0.
GuidanceMap highpass_mask(std::size_t w, std::size_t h, double cutoff);

// Guidance map: inverted-intensity term plus the high-pass residue of the
// grayscale image, clamped to [0,1]. `cutoff` is quoted at 256x256 and scales
// with min(w,h)/256 for other extents. Extents must be powers of two.
GuidanceMap fag(const img::RgbImage& image, double lambda, double cutoff);

}  // namespace lowlight::spectral
