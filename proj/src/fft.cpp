#include "lowlight/fft.hpp"

#include <cmath>
#include <numbers>

namespace lowlight::spectral {

namespace {

constexpr double kPi = std::numbers::pi;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// Bluestein's algorithm: reindex as a convolution and evaluate it with a
// power-of-two transform of length >= 2n-1.
std::vector<cd> bluestein(const std::vector<cd>& x, bool inverse) {
    const std::size_t n = x.size();
    const double sign = inverse ? 1.0 : -1.0;
    std::vector<cd> w(n);
    for (std::size_t k = 0; k < n; ++k) {
        // k^2/2 mod n kept exact with integers: k^2 mod 2n avoids angle blowup
        const std::size_t k2 = (k * k) % (2 * n);
        const double angle = sign * kPi * double(k2) / double(n);
        w[k] = cd(std::cos(angle), std::sin(angle));
    }
    const std::size_t m = next_pow2(2 * n - 1);
    std::vector<cd> a(m), b(m);
    for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * w[k];
    b[0] = std::conj(w[0]);
    for (std::size_t k = 1; k < n; ++k) b[k] = b[m - k] = std::conj(w[k]);
    fft_pow2(a.data(), m, false);
    fft_pow2(b.data(), m, false);
    for (std::size_t i = 0; i < m; ++i) a[i] *= b[i];
    fft_pow2(a.data(), m, true);
    std::vector<cd> out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = a[k] * w[k] / double(m);
    return out;
}

}  // namespace

void fft_pow2(cd* data, std::size_t n, bool inverse) {
    if (!is_pow2(n)) throw ContractError("fft_pow2: length must be a power of two");
    if (n == 1) return;
    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(data[i], data[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double angle = (inverse ? 2.0 : -2.0) * kPi / double(len);
        const cd wl(std::cos(angle), std::sin(angle));
        for (std::size_t i = 0; i < n; i += len) {
            cd w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const cd u = data[i + k];
                const cd v = data[i + k + len / 2] * w;
                data[i + k] = u + v;
                data[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

std::vector<cd> fft_any(std::vector<cd> data, bool inverse) {
    if (data.empty()) return data;
    if (is_pow2(data.size())) {
        fft_pow2(data.data(), data.size(), inverse);
        return data;
    }
    return bluestein(data, inverse);
}

std::vector<cd> fft2d_any(std::vector<cd> data, std::size_t w, std::size_t h, bool inverse) {
    if (data.size() != w * h) throw DimensionError("fft2d_any: data size mismatch");
    std::vector<cd> row(w);
    for (std::size_t y = 0; y < h; ++y) {
        std::copy(data.begin() + long(y * w), data.begin() + long((y + 1) * w), row.begin());
        row = fft_any(std::move(row), inverse);
        std::copy(row.begin(), row.end(), data.begin() + long(y * w));
    }
    std::vector<cd> col(h);
    for (std::size_t x = 0; x < w; ++x) {
        for (std::size_t y = 0; y < h; ++y) col[y] = data[y * w + x];
        col = fft_any(std::move(col), inverse);
        for (std::size_t y = 0; y < h; ++y) data[y * w + x] = col[y];
    }
    return data;
}

Spectrum fft2d(const img::GrayImage& image) {
    if (!is_pow2(image.width) || !is_pow2(image.height))
        throw ContractError("fft2d: image extents must be powers of two");
    Spectrum s(image.width, image.height);
    for (std::size_t i = 0; i < image.values.size(); ++i) s.bins[i] = cd(image.values[i], 0.0);
    for (std::size_t y = 0; y < s.height; ++y)
        fft_pow2(s.bins.data() + y * s.width, s.width, false);
    std::vector<cd> col(s.height);
    for (std::size_t x = 0; x < s.width; ++x) {
        for (std::size_t y = 0; y < s.height; ++y) col[y] = s.bins[y * s.width + x];
        fft_pow2(col.data(), s.height, false);
        for (std::size_t y = 0; y < s.height; ++y) s.bins[y * s.width + x] = col[y];
    }
    return s;
}

img::GrayImage ifft2d(const Spectrum& s) {
    if (!is_pow2(s.width) || !is_pow2(s.height))
        throw ContractError("ifft2d: spectrum extents must be powers of two");
    std::vector<cd> work = s.bins;
    for (std::size_t y = 0; y < s.height; ++y)
        fft_pow2(work.data() + y * s.width, s.width, true);
    std::vector<cd> col(s.height);
    for (std::size_t x = 0; x < s.width; ++x) {
        for (std::size_t y = 0; y < s.height; ++y) col[y] = work[y * s.width + x];
        fft_pow2(col.data(), s.height, true);
        for (std::size_t y = 0; y < s.height; ++y) work[y * s.width + x] = col[y];
    }
    img::GrayImage out(s.width, s.height);
    const double scale = 1.0 / double(s.width * s.height);
    for (std::size_t i = 0; i < work.size(); ++i) out.values[i] = work[i].real() * scale;
    return out;
}

}  // namespace lowlight::spectral
