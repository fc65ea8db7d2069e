#pragma once

#include <complex>
#include <vector>

#include "lowlight/error.hpp"
#include "lowlight/image.hpp"

namespace lowlight::spectral {

using cd = std::complex<double>;

// Frequency-domain raster, row-major, DC at bin (0,0). Forward transform is
// unnormalized; the inverse carries the 1/(W*H) factor.
struct Spectrum {
    std::size_t width = 0, height = 0;
    std::vector<cd> bins;

    Spectrum() = default;
    Spectrum(std::size_t w, std::size_t h) : width(w), height(h), bins(w * h) {}
    cd& at(std::size_t u, std::size_t v) { return bins[v * width + u]; }
    cd at(std::size_t u, std::size_t v) const { return bins[v * width + u]; }
};

// In-place radix-2 transform; n must be a power of two.
void fft_pow2(cd* data, std::size_t n, bool inverse);

// Arbitrary-length transform (Bluestein for non-power-of-two n). The inverse
// here is unscaled, like the forward with conjugated twiddles.
std::vector<cd> fft_any(std::vector<cd> data, bool inverse);

// 2-D transforms over row-major data, rows then columns. Power-of-two extents
// enforced for the image-facing pair below; the *_any variants accept any size.
Spectrum fft2d(const img::GrayImage& image);
img::GrayImage ifft2d(const Spectrum& s);  // real part of inverse, scaled

std::vector<cd> fft2d_any(std::vector<cd> data, std::size_t w, std::size_t h, bool inverse);

}  // namespace lowlight::spectral
