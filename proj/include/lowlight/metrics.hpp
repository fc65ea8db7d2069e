#pragma once

#include <vector>

#include "lowlight/image.hpp"

namespace lowlight::metrics {

// 10*log10(1/MSE) on [0,1] data, capped at 99 dB (identical images included).
double psnr(const img::GrayImage& a, const img::GrayImage& b);

// Mean structural similarity over valid 11x11 windows, Gaussian weights
// sigma = 1.5, C1 = 0.01^2, C2 = 0.03^2.
double ssim(const img::GrayImage& a, const img::GrayImage& b);

// Feature similarity: phase congruency (log-Gabor, 4 scales / 4 orientations)
// and Scharr gradient magnitude, pooled with the pointwise PC maximum.
double fsim(const img::GrayImage& a, const img::GrayImage& b);

// Phase congruency map of one image on the 0..255 scale (exposed for tests).
std::vector<double> phase_congruency(const std::vector<double>& image, std::size_t w,
                                     std::size_t h);

struct MetricRow {
    double psnr = 0.0;
    double ssim = 0.0;
    double fsim = 0.0;
};

MetricRow all_metrics(const img::GrayImage& a, const img::GrayImage& b);

}  // namespace lowlight::metrics
