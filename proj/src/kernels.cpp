#include "lowlight/kernels.hpp"

#include <atomic>
#include <cstdlib>

namespace lowlight::kernels {

namespace {

void add_scalar(double* dst, const double* a, const double* b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] + b[i];
}

void sub_scalar(double* dst, const double* a, const double* b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] - b[i];
}

void mul_scalar(double* dst, const double* a, const double* b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] * b[i];
}

void scale_scalar(double* dst, const double* a, double s, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] * s;
}

void axpy_scalar(double* dst, double s, const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = dst[i] + s * x[i];
}

double sum_scalar(const double* a, std::size_t n) {
    double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
    const std::size_t n4 = n & ~std::size_t{3};
    for (std::size_t i = 0; i < n4; i += 4) {
        acc0 += a[i];
        acc1 += a[i + 1];
        acc2 += a[i + 2];
        acc3 += a[i + 3];
    }
    double total = (acc0 + acc1) + (acc2 + acc3);
    for (std::size_t i = n4; i < n; ++i) total += a[i];
    return total;
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
    const std::size_t n4 = n & ~std::size_t{3};
    for (std::size_t i = 0; i < n4; i += 4) {
        acc0 += a[i] * b[i];
        acc1 += a[i + 1] * b[i + 1];
        acc2 += a[i + 2] * b[i + 2];
        acc3 += a[i + 3] * b[i + 3];
    }
    double total = (acc0 + acc1) + (acc2 + acc3);
    for (std::size_t i = n4; i < n; ++i) total += a[i] * b[i];
    return total;
}

const Dispatch kScalar = {add_scalar, sub_scalar,   mul_scalar, scale_scalar,
                          axpy_scalar, sum_scalar,  dot_scalar};

std::atomic<bool> g_force_scalar{false};

bool env_forces_scalar() {
    const char* v = std::getenv("LOWLIGHT_FORCE_SCALAR");
    return v != nullptr && v[0] != '\0' && v[0] != '0';
}

}  // namespace

const Dispatch& scalar() { return kScalar; }

void force_scalar(bool on) { g_force_scalar.store(on); }

const Dispatch& active() {
    static const bool env_scalar = env_forces_scalar();
    if (env_scalar || g_force_scalar.load()) return kScalar;
    const Dispatch* v = avx2();
    return v ? *v : kScalar;
}

std::string backend_name() { return &active() == &kScalar ? "scalar" : "avx2"; }

}  // namespace lowlight::kernels
