#pragma once

#include <cstddef>
#include <string>

// f64 array kernels behind the tensor ops. Each kernel has a scalar
// reference implementation and, on x86-64 with AVX2, a vector variant
// selected once at startup. Both variants round identically: the vector
// code uses mul+add (no FMA) and the reductions are defined with four
// independent lanes in both paths, so results are bit-equal and the
// equivalence tests compare with ==.

namespace lowlight::kernels {

struct Dispatch {
    void (*add)(double* dst, const double* a, const double* b, std::size_t n);
    void (*sub)(double* dst, const double* a, const double* b, std::size_t n);
    void (*mul)(double* dst, const double* a, const double* b, std::size_t n);
    void (*scale)(double* dst, const double* a, double s, std::size_t n);
    // dst[i] += s * x[i]
    void (*axpy)(double* dst, double s, const double* x, std::size_t n);
    // four-lane striped sum: acc[j] over elements i with i%4==j of the
    // aligned prefix, lanes combined as (acc0+acc1)+(acc2+acc3), tail in order
    double (*sum)(const double* a, std::size_t n);
    // same striping for sum(a[i]*b[i])
    double (*dot)(const double* a, const double* b, std::size_t n);
};

// Active kernel table. Resolved from cpuid on first use.
const Dispatch& active();

// Scalar reference table, always available (oracle for equivalence tests).
const Dispatch& scalar();

// AVX2 table, or nullptr when unsupported by the build or the CPU.
const Dispatch* avx2();

// "avx2" or "scalar"
std::string backend_name();

// Force the scalar path (e.g. LOWLIGHT_FORCE_SCALAR=1 does this at startup).
void force_scalar(bool on);

}  // namespace lowlight::kernels
