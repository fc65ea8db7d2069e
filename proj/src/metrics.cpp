#include "lowlight/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lowlight/fft.hpp"

namespace lowlight::metrics {

namespace {

constexpr double kPi = std::numbers::pi;

void check_extents(const img::GrayImage& a, const img::GrayImage& b, const char* who) {
    if (a.width != b.width || a.height != b.height)
        throw DimensionError(std::string(who) + ": image extents differ");
    if (a.width == 0 || a.height == 0)
        throw DimensionError(std::string(who) + ": empty image");
}

// median over a copy; even counts average the two central elements
double median(std::vector<double> v) {
    const std::size_t n = v.size();
    auto mid = v.begin() + long(n / 2);
    std::nth_element(v.begin(), mid, v.end());
    double m = *mid;
    if (n % 2 == 0) {
        auto lo = std::max_element(v.begin(), mid);
        m = (m + *lo) / 2.0;
    }
    return m;
}

std::vector<double> block_mean_downsample(const std::vector<double>& in, std::size_t w,
                                          std::size_t h, std::size_t f, std::size_t& ow,
                                          std::size_t& oh) {
    ow = w / f;
    oh = h / f;
    std::vector<double> out(ow * oh, 0.0);
    for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (std::size_t dy = 0; dy < f; ++dy)
                for (std::size_t dx = 0; dx < f; ++dx)
                    acc += in[(y * f + dy) * w + (x * f + dx)];
            out[y * ow + x] = acc / double(f * f);
        }
    return out;
}

// Scharr derivative, zero-padded borders, same extent as the input.
void scharr_gradient(const std::vector<double>& in, std::size_t w, std::size_t h,
                     std::vector<double>& mag) {
    static const double kx[9] = {3, 0, -3, 10, 0, -10, 3, 0, -3};
    static const double ky[9] = {3, 10, 3, 0, 0, 0, -3, -10, -3};
    mag.assign(w * h, 0.0);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            double gx = 0.0, gy = 0.0;
            for (int dy = -1; dy <= 1; ++dy) {
                const long yy = long(y) + dy;
                if (yy < 0 || yy >= long(h)) continue;
                for (int dx = -1; dx <= 1; ++dx) {
                    const long xx = long(x) + dx;
                    if (xx < 0 || xx >= long(w)) continue;
                    const double v = in[std::size_t(yy) * w + std::size_t(xx)];
                    const int ki = (dy + 1) * 3 + (dx + 1);
                    gx += kx[ki] * v;
                    gy += ky[ki] * v;
                }
            }
            gx /= 16.0;
            gy /= 16.0;
            mag[y * w + x] = std::sqrt(gx * gx + gy * gy);
        }
    }
}

struct PolarGrid {
    std::vector<double> radius;  // normalized frequency radius, DC entry forced to 1
    std::vector<double> lowpass;
    std::vector<double> sintheta, costheta;
};

PolarGrid make_polar_grid(std::size_t w, std::size_t h) {
    PolarGrid g;
    g.radius.resize(w * h);
    g.lowpass.resize(w * h);
    g.sintheta.resize(w * h);
    g.costheta.resize(w * h);
    for (std::size_t v = 0; v < h; ++v) {
        long sv = long(v);
        if (sv >= long((h + 1) / 2)) sv -= long(h);
        const double y = double(sv) / double(h);
        for (std::size_t u = 0; u < w; ++u) {
            long su = long(u);
            if (su >= long((w + 1) / 2)) su -= long(w);
            const double x = double(su) / double(w);
            const std::size_t i = v * w + u;
            const double r = std::sqrt(x * x + y * y);
            // Butterworth low-pass, cutoff .45 cycles, order 15
            g.lowpass[i] = 1.0 / (1.0 + std::pow(r / 0.45, 30.0));
            g.radius[i] = r;
            const double th = std::atan2(-y, x);
            g.sintheta[i] = std::sin(th);
            g.costheta[i] = std::cos(th);
        }
    }
    g.radius[0] = 1.0;  // avoids log(0) in the log-Gabor expression
    return g;
}

}  // namespace

std::vector<double> phase_congruency(const std::vector<double>& image, std::size_t w,
                                     std::size_t h) {
    if (image.size() != w * h) throw DimensionError("phase_congruency: data size mismatch");
    constexpr int kScales = 4;
    constexpr int kOrients = 4;
    constexpr double kMinWaveLength = 6.0;
    constexpr double kMult = 2.0;
    constexpr double kSigmaOnf = 0.55;
    constexpr double kDThetaOnSigma = 1.2;
    constexpr double kNoiseGain = 2.0;  // k standard deviations above mean noise
    constexpr double kEpsilon = 1e-4;
    const double theta_sigma = kPi / kOrients / kDThetaOnSigma;
    const std::size_t n = w * h;

    const PolarGrid grid = make_polar_grid(w, h);

    std::vector<spectral::cd> imagefft(n);
    for (std::size_t i = 0; i < n; ++i) imagefft[i] = spectral::cd(image[i], 0.0);
    imagefft = spectral::fft2d_any(std::move(imagefft), w, h, false);

    // radial filter components, shared across orientations
    std::vector<std::vector<double>> log_gabor(kScales);
    const double log_sigma = std::log(kSigmaOnf);
    for (int s = 0; s < kScales; ++s) {
        const double fo = 1.0 / (kMinWaveLength * std::pow(kMult, s));
        auto& lg = log_gabor[std::size_t(s)];
        lg.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double lr = std::log(grid.radius[i] / fo);
            lg[i] = std::exp(-(lr * lr) / (2.0 * log_sigma * log_sigma)) * grid.lowpass[i];
        }
        lg[0] = 0.0;
    }

    std::vector<double> energy_all(n, 0.0), an_all(n, 0.0);
    std::vector<double> sum_e(n), sum_o(n), sum_an(n);
    std::vector<double> filter(n);
    std::vector<std::vector<double>> eo_re(kScales), eo_im(kScales), ifft_filt(kScales);

    for (int o = 0; o < kOrients; ++o) {
        const double angl = o * kPi / kOrients;
        const double ca = std::cos(angl), sa = std::sin(angl);
        std::fill(sum_e.begin(), sum_e.end(), 0.0);
        std::fill(sum_o.begin(), sum_o.end(), 0.0);
        std::fill(sum_an.begin(), sum_an.end(), 0.0);
        double em_n = 0.0;

        for (int s = 0; s < kScales; ++s) {
            double filter_sq_sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double ds = grid.sintheta[i] * ca - grid.costheta[i] * sa;
                const double dc = grid.costheta[i] * ca + grid.sintheta[i] * sa;
                const double dtheta = std::abs(std::atan2(ds, dc));
                const double spread =
                    std::exp(-(dtheta * dtheta) / (2.0 * theta_sigma * theta_sigma));
                filter[i] = log_gabor[std::size_t(s)][i] * spread;
                filter_sq_sum += filter[i] * filter[i];
            }
            if (s == 0) em_n = filter_sq_sum;

            std::vector<spectral::cd> filt_ifft(n);
            for (std::size_t i = 0; i < n; ++i) filt_ifft[i] = spectral::cd(filter[i], 0.0);
            filt_ifft = spectral::fft2d_any(std::move(filt_ifft), w, h, true);
            auto& ff = ifft_filt[std::size_t(s)];
            ff.resize(n);
            const double filt_scale = std::sqrt(double(n)) / double(n);
            for (std::size_t i = 0; i < n; ++i) ff[i] = filt_ifft[i].real() * filt_scale;

            std::vector<spectral::cd> eo(n);
            for (std::size_t i = 0; i < n; ++i) eo[i] = imagefft[i] * filter[i];
            eo = spectral::fft2d_any(std::move(eo), w, h, true);
            auto& re = eo_re[std::size_t(s)];
            auto& im = eo_im[std::size_t(s)];
            re.resize(n);
            im.resize(n);
            const double inv_n = 1.0 / double(n);
            for (std::size_t i = 0; i < n; ++i) {
                re[i] = eo[i].real() * inv_n;
                im[i] = eo[i].imag() * inv_n;
                sum_e[i] += re[i];
                sum_o[i] += im[i];
                sum_an[i] += std::sqrt(re[i] * re[i] + im[i] * im[i]);
            }
        }

        std::vector<double> energy(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double xe =
                std::sqrt(sum_e[i] * sum_e[i] + sum_o[i] * sum_o[i]) + kEpsilon;
            const double mean_e = sum_e[i] / xe, mean_o = sum_o[i] / xe;
            for (int s = 0; s < kScales; ++s) {
                const double e = eo_re[std::size_t(s)][i], om = eo_im[std::size_t(s)][i];
                energy[i] += e * mean_e + om * mean_o - std::abs(e * mean_o - om * mean_e);
            }
        }

        // Rayleigh noise floor estimated from the smallest-scale response
        std::vector<double> e2(n);
        for (std::size_t i = 0; i < n; ++i)
            e2[i] = eo_re[0][i] * eo_re[0][i] + eo_im[0][i] * eo_im[0][i];
        const double mean_e2n = median(std::move(e2)) / std::log(2.0);
        const double noise_power = mean_e2n / em_n;
        double sum_an2 = 0.0, sum_ai_aj = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (int s = 0; s < kScales; ++s) {
                const double f = ifft_filt[std::size_t(s)][i];
                sum_an2 += f * f;
            }
            for (int si = 0; si < kScales - 1; ++si)
                for (int sj = si + 1; sj < kScales; ++sj)
                    sum_ai_aj += ifft_filt[std::size_t(si)][i] * ifft_filt[std::size_t(sj)][i];
        }
        const double est_noise_energy2 = 2.0 * noise_power * sum_an2 +
                                         4.0 * noise_power * sum_ai_aj;
        const double tau = std::sqrt(est_noise_energy2 / 2.0);
        const double est_noise_energy = tau * std::sqrt(kPi / 2.0);
        const double est_noise_sigma = std::sqrt((2.0 - kPi / 2.0) * tau * tau);
        const double threshold = (est_noise_energy + kNoiseGain * est_noise_sigma) / 1.7;

        for (std::size_t i = 0; i < n; ++i) {
            energy_all[i] += std::max(energy[i] - threshold, 0.0);
            an_all[i] += sum_an[i];
        }
    }

    std::vector<double> pc(n);
    for (std::size_t i = 0; i < n; ++i)
        pc[i] = an_all[i] > 0.0 ? energy_all[i] / an_all[i] : 0.0;
    return pc;
}

double psnr(const img::GrayImage& a, const img::GrayImage& b) {
    check_extents(a, b, "psnr");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const double d = a.values[i] - b.values[i];
        acc += d * d;
    }
    const double mse = acc / double(a.values.size());
    if (mse <= 0.0) return 99.0;
    return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

double ssim(const img::GrayImage& a, const img::GrayImage& b) {
    check_extents(a, b, "ssim");
    constexpr std::size_t kWin = 11;
    constexpr double kSigma = 1.5;
    constexpr double kC1 = 0.01 * 0.01, kC2 = 0.03 * 0.03;
    if (a.width < kWin || a.height < kWin)
        throw ContractError("ssim: image smaller than the 11x11 window");

    double weights[kWin * kWin];
    double wsum = 0.0;
    for (std::size_t y = 0; y < kWin; ++y)
        for (std::size_t x = 0; x < kWin; ++x) {
            const double dx = double(x) - 5.0, dy = double(y) - 5.0;
            weights[y * kWin + x] = std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
            wsum += weights[y * kWin + x];
        }
    for (double& w : weights) w /= wsum;

    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t y0 = 0; y0 + kWin <= a.height; ++y0) {
        for (std::size_t x0 = 0; x0 + kWin <= a.width; ++x0) {
            double mx = 0.0, my = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
            for (std::size_t y = 0; y < kWin; ++y)
                for (std::size_t x = 0; x < kWin; ++x) {
                    const double w = weights[y * kWin + x];
                    const double va = a.at(x0 + x, y0 + y), vb = b.at(x0 + x, y0 + y);
                    mx += w * va;
                    my += w * vb;
                    // products group as w*(u*v) so that swapping the images
                    // commutes bitwise and ssim(x, x) lands exactly on 1
                    sxx += w * (va * va);
                    syy += w * (vb * vb);
                    sxy += w * (va * vb);
                }
            const double vx = sxx - mx * mx, vy = syy - my * my, cxy = sxy - mx * my;
            const double num = (2.0 * mx * my + kC1) * (2.0 * cxy + kC2);
            const double den = (mx * mx + my * my + kC1) * (vx + vy + kC2);
            total += num / den;
            ++count;
        }
    }
    return total / double(count);
}

double fsim(const img::GrayImage& a, const img::GrayImage& b) {
    check_extents(a, b, "fsim");
    constexpr double kT1 = 0.85;
    constexpr double kT2 = 160.0;

    // 0..255 working scale, as the similarity constants assume
    std::size_t w = a.width, h = a.height;
    std::vector<double> ia(w * h), ib(w * h);
    for (std::size_t i = 0; i < w * h; ++i) {
        ia[i] = a.values[i] * 255.0;
        ib[i] = b.values[i] * 255.0;
    }
    const std::size_t f =
        std::max<std::size_t>(1, std::size_t(std::llround(double(std::min(w, h)) / 256.0)));
    if (f > 1) {
        std::size_t ow = 0, oh = 0;
        ia = block_mean_downsample(ia, w, h, f, ow, oh);
        ib = block_mean_downsample(ib, w, h, f, ow, oh);
        w = ow;
        h = oh;
    }

    const std::vector<double> pc1 = phase_congruency(ia, w, h);
    const std::vector<double> pc2 = phase_congruency(ib, w, h);
    std::vector<double> g1, g2;
    scharr_gradient(ia, w, h, g1);
    scharr_gradient(ib, w, h, g2);

    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < w * h; ++i) {
        const double s_pc = (2.0 * pc1[i] * pc2[i] + kT1) /
                            (pc1[i] * pc1[i] + pc2[i] * pc2[i] + kT1);
        const double s_g =
            (2.0 * g1[i] * g2[i] + kT2) / (g1[i] * g1[i] + g2[i] * g2[i] + kT2);
        const double pcm = std::max(pc1[i], pc2[i]);
        num += s_pc * s_g * pcm;
        den += pcm;
    }
    if (den == 0.0) return 1.0;  // featureless pair: no phase congruency anywhere
    return num / den;
}

MetricRow all_metrics(const img::GrayImage& a, const img::GrayImage& b) {
    return {psnr(a, b), ssim(a, b), fsim(a, b)};
}

}  // namespace lowlight::metrics
