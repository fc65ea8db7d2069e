#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <cstring>
#include <vector>

#include "lowlight/kernels.hpp"
#include "lowlight/rng.hpp"

using namespace lowlight;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-3.0, 3.0);
    return v;
}

bool bits_equal(double a, double b) {
    std::uint64_t ba, bb;
    std::memcpy(&ba, &a, 8);
    std::memcpy(&bb, &b, 8);
    return ba == bb;
}

bool bits_equal(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!bits_equal(a[i], b[i])) return false;
    return true;
}

}  // namespace

TEST_CASE("avx2 variants are bit-equal to the scalar reference") {
    const kernels::Dispatch* vec = kernels::avx2();
    if (!vec) {
        MESSAGE("AVX2 unavailable on this host; equivalence not exercised");
        return;
    }
    const kernels::Dispatch& ref = kernels::scalar();
    Rng rng(20240811);

    // sizes straddling the 4-lane width, including 0 and odd tails
    for (std::size_t n : {0u, 1u, 2u, 3u, 4u, 5u, 7u, 8u, 13u, 64u, 67u, 1024u, 1031u}) {
        auto a = random_vec(rng, n);
        auto b = random_vec(rng, n);
        const double s = rng.uniform(-2.0, 2.0);

        std::vector<double> r1(n), r2(n);
        ref.add(r1.data(), a.data(), b.data(), n);
        vec->add(r2.data(), a.data(), b.data(), n);
        CHECK(bits_equal(r1, r2));

        ref.sub(r1.data(), a.data(), b.data(), n);
        vec->sub(r2.data(), a.data(), b.data(), n);
        CHECK(bits_equal(r1, r2));

        ref.mul(r1.data(), a.data(), b.data(), n);
        vec->mul(r2.data(), a.data(), b.data(), n);
        CHECK(bits_equal(r1, r2));

        ref.scale(r1.data(), a.data(), s, n);
        vec->scale(r2.data(), a.data(), s, n);
        CHECK(bits_equal(r1, r2));

        r1 = b;
        r2 = b;
        ref.axpy(r1.data(), s, a.data(), n);
        vec->axpy(r2.data(), s, a.data(), n);
        CHECK(bits_equal(r1, r2));

        CHECK(bits_equal(ref.sum(a.data(), n), vec->sum(a.data(), n)));
        CHECK(bits_equal(ref.dot(a.data(), b.data(), n), vec->dot(a.data(), b.data(), n)));
    }
}

TEST_CASE("striped reductions match a plain loop to rounding") {
    Rng rng(7);
    auto a = random_vec(rng, 1001);
    auto b = random_vec(rng, 1001);
    double plain_sum = 0.0, plain_dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        plain_sum += a[i];
        plain_dot += a[i] * b[i];
    }
    CHECK(kernels::scalar().sum(a.data(), a.size()) == doctest::Approx(plain_sum).epsilon(1e-12));
    CHECK(kernels::scalar().dot(a.data(), b.data(), a.size()) ==
          doctest::Approx(plain_dot).epsilon(1e-12));
}

TEST_CASE("dispatch honors force_scalar") {
    kernels::force_scalar(true);
    CHECK(kernels::backend_name() == "scalar");
    kernels::force_scalar(false);
    if (kernels::avx2()) CHECK(kernels::backend_name() == "avx2");
}

TEST_CASE("repeated evaluation is bit-identical") {
    Rng rng(99);
    auto a = random_vec(rng, 513);
    auto b = random_vec(rng, 513);
    const auto& k = kernels::active();
    std::vector<double> r1(a.size()), r2(a.size());
    k.add(r1.data(), a.data(), b.data(), a.size());
    k.add(r2.data(), a.data(), b.data(), a.size());
    CHECK(bits_equal(r1, r2));
    CHECK(bits_equal(k.dot(a.data(), b.data(), a.size()),
                     k.dot(a.data(), b.data(), a.size())));
}
