#include "lowlight/fag.hpp"

#include <algorithm>
#include <cmath>

namespace lowlight::spectral {

GuidanceMap highpass_mask(std::size_t w, std::size_t h, double cutoff) {
    if (w == 0 || h == 0) throw ContractError("highpass_mask: empty extent");
    if (cutoff < 0) throw ContractError("highpass_mask: cutoff must be >= 0");
    GuidanceMap mask(w, h, 1.0);
    const double c2 = cutoff * cutoff;
    for (std::size_t v = 0; v < h; ++v) {
        const long sv = v <= h / 2 ? long(v) : long(v) - long(h);
        for (std::size_t u = 0; u < w; ++u) {
            const long su = u <= w / 2 ? long(u) : long(u) - long(w);
            if (double(su * su + sv * sv) <= c2) mask.at(u, v) = 0.0;
        }
    }
    mask.at(0, 0) = 0.0;
    return mask;
}

GuidanceMap fag(const img::RgbImage& image, double lambda, double cutoff) {
    if (lambda <= 0) throw ContractError("fag: lambda must be positive");
    const img::GrayImage gray = img::rgb_to_gray(image);

    Spectrum spec = fft2d(gray);
    const GuidanceMap mask =
        highpass_mask(image.width, image.height,
                      cutoff * double(std::min(image.width, image.height)) / 256.0);
    for (std::size_t i = 0; i < spec.bins.size(); ++i) spec.bins[i] *= mask.values[i];
    const img::GrayImage term2 = ifft2d(spec);

    GuidanceMap out(image.width, image.height);
    const double k = lambda / std::sqrt(3.0);
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        const double sum_rgb =
            image.values[3 * i] + image.values[3 * i + 1] + image.values[3 * i + 2];
        const double term1 = 1.0 - k * sum_rgb;
        out.values[i] = std::clamp(term1 + term2.values[i], 0.0, 1.0);
    }
    return out;
}

}  // namespace lowlight::spectral
