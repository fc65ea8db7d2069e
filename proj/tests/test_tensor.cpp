#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <vector>

#include "lowlight/checkpoint.hpp"
#include "lowlight/ops.hpp"
#include "lowlight/rng.hpp"
#include "lowlight/tensor.hpp"

using namespace lowlight;
namespace fs = std::filesystem;

namespace {

Tensor random_tensor(Rng& rng, std::vector<std::size_t> shape, bool requires_grad = false,
                     double lo = -1.0, double hi = 1.0) {
    Tensor t = Tensor::zeros(std::move(shape), requires_grad);
    for (double& v : t.values()) v = rng.uniform(lo, hi);
    return t;
}

// Plain nested-loop convolution, written independently of ops::conv2d.
Tensor conv2d_bruteforce(const Tensor& in, const Tensor& k, const Tensor& b, int stride,
                         int pad) {
    const auto& is = in.shape();
    const auto& ks = k.shape();
    const std::size_t N = is[0], C = is[1], H = is[2], W = is[3];
    const std::size_t F = ks[0], KH = ks[2], KW = ks[3];
    const std::size_t OH = (H + 2 * pad - KH) / stride + 1;
    const std::size_t OW = (W + 2 * pad - KW) / stride + 1;
    Tensor out = Tensor::zeros({N, F, OH, OW});
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t f = 0; f < F; ++f)
            for (std::size_t oy = 0; oy < OH; ++oy)
                for (std::size_t ox = 0; ox < OW; ++ox) {
                    double acc = b[f];
                    for (std::size_t c = 0; c < C; ++c)
                        for (std::size_t ky = 0; ky < KH; ++ky)
                            for (std::size_t kx = 0; kx < KW; ++kx) {
                                const long iy = long(oy) * stride - pad + long(ky);
                                const long ix = long(ox) * stride - pad + long(kx);
                                if (iy < 0 || iy >= long(H) || ix < 0 || ix >= long(W)) continue;
                                acc += k[((f * C + c) * KH + ky) * KW + kx] *
                                       in[((n * C + c) * H + iy) * W + ix];
                            }
                    out[((n * F + f) * OH + oy) * OW + ox] = acc;
                }
    return out;
}

Tensor tconv2d_bruteforce(const Tensor& in, const Tensor& k, int stride, int pad) {
    const auto& is = in.shape();
    const auto& ks = k.shape();
    const std::size_t N = is[0], CI = is[1], H = is[2], W = is[3];
    const std::size_t CO = ks[1], KH = ks[2], KW = ks[3];
    const std::size_t OH = (H - 1) * stride - 2 * pad + KH;
    const std::size_t OW = (W - 1) * stride - 2 * pad + KW;
    Tensor out = Tensor::zeros({N, CO, OH, OW});
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t ci = 0; ci < CI; ++ci)
            for (std::size_t co = 0; co < CO; ++co)
                for (std::size_t iy = 0; iy < H; ++iy)
                    for (std::size_t ix = 0; ix < W; ++ix)
                        for (std::size_t ky = 0; ky < KH; ++ky)
                            for (std::size_t kx = 0; kx < KW; ++kx) {
                                const long oy = long(iy) * stride + long(ky) - pad;
                                const long ox = long(ix) * stride + long(kx) - pad;
                                if (oy < 0 || oy >= long(OH) || ox < 0 || ox >= long(OW))
                                    continue;
                                out[((n * CO + co) * OH + oy) * OW + ox] +=
                                    k[((ci * CO + co) * KH + ky) * KW + kx] *
                                    in[((n * CI + ci) * H + iy) * W + ix];
                            }
    return out;
}

// Central finite differences (f64, step 1e-5) against tape gradients.
// Pass when |ad-fd| <= 1e-5*max(|ad|,|fd|) or below the 1e-9 FD noise floor.
void check_gradients(std::vector<Tensor> inputs,
                     const std::function<Tensor(Tape*)>& build) {
    for (Tensor& x : inputs) x.zero_grad();
    Tape tape;
    Tensor out = build(&tape);
    REQUIRE(out.size() == 1);
    tape.backward(out);

    const double h = 1e-5;
    for (Tensor& x : inputs) {
        if (!x.requires_grad()) continue;
        auto g = x.grad();
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double keep = x[i];
            x[i] = keep + h;
            const double fp = build(nullptr).item();
            x[i] = keep - h;
            const double fm = build(nullptr).item();
            x[i] = keep;
            const double fd = (fp - fm) / (2 * h);
            const double ad = g[i];
            const double tol = 1e-5 * std::max(std::abs(fd), std::abs(ad));
            const bool ok = std::abs(ad - fd) <= std::max(tol, 1e-9);
            if (!ok) {
                CAPTURE(i);
                CAPTURE(ad);
                CAPTURE(fd);
            }
            CHECK(ok);
        }
    }
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    REQUIRE(a.shape() == b.shape());
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST_CASE("conv2d identity and constant-field cases") {
    Rng rng(1);
    Tensor in = random_tensor(rng, {1, 1, 4, 4});
    Tensor k = Tensor::from({1, 1, 1, 1}, {1.0});
    Tensor b = Tensor::zeros({1});
    Tensor out = ops::conv2d(nullptr, in, k, b, 1, 0);
    for (std::size_t i = 0; i < in.size(); ++i) CHECK(out[i] == in[i]);

    const double v = 0.37;
    Tensor cin = Tensor::full({1, 1, 5, 5}, v);
    Tensor ones = Tensor::full({1, 1, 3, 3}, 1.0);
    Tensor c = ops::conv2d(nullptr, cin, ones, b, 1, 1);
    // interior positions see the full window
    for (std::size_t y = 1; y < 4; ++y)
        for (std::size_t x = 1; x < 4; ++x)
            CHECK(c[y * 5 + x] == doctest::Approx(9 * v).epsilon(1e-15));
}

TEST_CASE("conv2d matches the brute-force loop oracle") {
    Rng rng(2);
    for (int trial = 0; trial < 6; ++trial) {
        const int stride = 1 + (trial % 3 == 2 ? 1 : 0);
        const int pad = trial % 2;
        Tensor in = random_tensor(rng, {1, 2, 5, 5});
        Tensor k = random_tensor(rng, {3, 2, 3, 3});
        Tensor b = random_tensor(rng, {3});
        Tensor got = ops::conv2d(nullptr, in, k, b, stride, pad);
        Tensor want = conv2d_bruteforce(in, k, b, stride, pad);
        CHECK(max_abs_diff(got, want) <= 1e-12);
    }
}

TEST_CASE("conv2d shape errors") {
    Tensor in = Tensor::zeros({1, 2, 4, 4});
    Tensor k = Tensor::zeros({3, 1, 3, 3});  // channel mismatch
    Tensor b = Tensor::zeros({3});
    CHECK_THROWS_AS(ops::conv2d(nullptr, in, k, b, 1, 0), DimensionError);
    Tensor k2 = Tensor::zeros({3, 2, 7, 7});  // larger than padded input
    CHECK_THROWS_AS(ops::conv2d(nullptr, in, k2, b, 1, 0), DimensionError);
}

TEST_CASE("transposed_conv2d basics and oracle") {
    Tensor in = Tensor::from({1, 1, 1, 1}, {0.7});
    Tensor k = Tensor::full({1, 1, 2, 2}, 1.0);
    Tensor out = ops::transposed_conv2d(nullptr, in, k, 2, 0);
    REQUIRE(out.shape() == std::vector<std::size_t>{1, 1, 2, 2});
    for (std::size_t i = 0; i < 4; ++i) CHECK(out[i] == 0.7);

    Rng rng(3);
    for (int trial = 0; trial < 4; ++trial) {
        const int stride = 1 + trial % 2;
        const int pad = trial / 2;
        Tensor x = random_tensor(rng, {1, 2, 4, 4});
        Tensor kk = random_tensor(rng, {2, 3, 3, 3});
        Tensor got = ops::transposed_conv2d(nullptr, x, kk, stride, pad);
        Tensor want = tconv2d_bruteforce(x, kk, stride, pad);
        CHECK(max_abs_diff(got, want) <= 1e-12);
    }
}

TEST_CASE("transposed_conv2d equals conv2d input-gradient for matched geometry") {
    // H chosen so (H + 2*pad - k) divides by stride and the mapping inverts
    Rng rng(4);
    const int stride = 2, pad = 1;
    Tensor in = random_tensor(rng, {1, 2, 7, 7}, true);
    Tensor k = random_tensor(rng, {3, 2, 3, 3});
    Tensor b = Tensor::zeros({3});

    Tape tape;
    Tensor out = ops::conv2d(&tape, in, k, b, stride, pad);
    Tensor seed = random_tensor(rng, out.shape());
    // backward with an arbitrary seed via sum(out*seed)
    Tensor weighted = ops::mul(&tape, out, seed);
    Tensor loss = ops::sum(&tape, weighted);
    tape.backward(loss);

    // same kernel memory reinterpreted as [Cin=F, Cout=C, kh, kw]
    Tensor kt = Tensor::from(
        {3, 2, 3, 3}, std::vector<double>(k.values().begin(), k.values().end()));
    Tensor via_tconv = ops::transposed_conv2d(nullptr, seed, kt, stride, pad);
    REQUIRE(via_tconv.shape() == in.shape());
    auto g = in.grad();
    for (std::size_t i = 0; i < in.size(); ++i)
        CHECK(std::abs(g[i] - via_tconv[i]) <= 1e-12);
}

TEST_CASE("conv2d backward on a sum seed equals transposed_conv2d of ones") {
    Rng rng(14);
    Tensor in = random_tensor(rng, {1, 2, 5, 5}, true);
    Tensor k = random_tensor(rng, {3, 2, 3, 3});
    Tensor b = Tensor::zeros({3});
    Tape tape;
    Tensor out = ops::conv2d(&tape, in, k, b, 1, 1);
    Tensor loss = ops::sum(&tape, out);
    tape.backward(loss);

    Tensor ones = Tensor::full(out.shape(), 1.0);
    Tensor kt = Tensor::from(
        {3, 2, 3, 3}, std::vector<double>(k.values().begin(), k.values().end()));
    Tensor want = ops::transposed_conv2d(nullptr, ones, kt, 1, 1);
    auto g = in.grad();
    for (std::size_t i = 0; i < in.size(); ++i)
        CHECK(std::abs(g[i] - want[i]) <= 1e-12);
}

TEST_CASE("pool2d cases") {
    Rng rng(5);
    Tensor in = random_tensor(rng, {1, 2, 4, 4});
    Tensor idm = ops::pool2d(nullptr, in, 1, ops::PoolMode::kMean);
    for (std::size_t i = 0; i < in.size(); ++i) CHECK(idm[i] == in[i]);

    Tensor m = Tensor::from({1, 1, 2, 2}, {1, 3, 5, 7});
    CHECK(ops::pool2d(nullptr, m, 2, ops::PoolMode::kMean).item() == 4.0);

    Tensor odd = Tensor::zeros({1, 1, 3, 3});
    CHECK_THROWS_AS(ops::pool2d(nullptr, odd, 2, ops::PoolMode::kMax), DimensionError);
}

TEST_CASE("max-pool gradient routes to first argmax") {
    // window of equal values: the seed must land on the first row-major index
    Tensor in = Tensor::from({1, 1, 2, 2}, {0.5, 0.5, 0.5, 0.5}, true);
    Tape tape;
    Tensor out = ops::pool2d(&tape, in, 2, ops::PoolMode::kMax);
    Tensor loss = ops::sum(&tape, out);
    tape.backward(loss);
    auto g = in.grad();
    CHECK(g[0] == 1.0);
    CHECK(g[1] == 0.0);
    CHECK(g[2] == 0.0);
    CHECK(g[3] == 0.0);
}

TEST_CASE("linear cases and oracle") {
    Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
    Tensor zb = Tensor::zeros({2});
    Tensor x = Tensor::from({1, 2}, {3.0, -2.0});
    Tensor y = ops::linear(nullptr, x, eye, zb);
    CHECK(y[0] == 3.0);
    CHECK(y[1] == -2.0);

    Tensor w = Tensor::from({2, 1}, {1, 1});
    Tensor b1 = Tensor::from({1}, {1});
    Tensor x2 = Tensor::from({1, 2}, {1, 2});
    CHECK(ops::linear(nullptr, x2, w, b1).item() == 4.0);

    Rng rng(6);
    Tensor xi = random_tensor(rng, {3, 4});
    Tensor wi = random_tensor(rng, {4, 5});
    Tensor bi = random_tensor(rng, {5});
    Tensor got = ops::linear(nullptr, xi, wi, bi);
    for (std::size_t n = 0; n < 3; ++n)
        for (std::size_t e = 0; e < 5; ++e) {
            double acc = bi[e];
            for (std::size_t d = 0; d < 4; ++d) acc += xi[n * 4 + d] * wi[d * 5 + e];
            CHECK(std::abs(got[n * 5 + e] - acc) <= 1e-12);
        }

    Tensor wbad = Tensor::zeros({3, 5});
    CHECK_THROWS_AS(ops::linear(nullptr, xi, wbad, bi), DimensionError);
}

TEST_CASE("backward trivial identities") {
    Rng rng(7);
    Tensor x = random_tensor(rng, {2, 3}, true);
    {
        Tape tape;
        Tensor s = ops::sum(&tape, x);
        tape.backward(s);
        for (double g : x.grad()) CHECK(g == 1.0);
    }
    x.zero_grad();
    {
        Tape tape;
        Tensor s = ops::sum(&tape, ops::mul(&tape, x, x));
        tape.backward(s);
        auto g = x.grad();
        for (std::size_t i = 0; i < x.size(); ++i)
            CHECK(g[i] == doctest::Approx(2 * x[i]).epsilon(1e-15));
    }
    {
        Tape tape;
        Tensor nonscalar = ops::mul(&tape, x, x);
        CHECK_THROWS_AS(tape.backward(nonscalar), ContractError);
    }
}

TEST_CASE("finite differences agree with tape gradients across all ops") {
    Rng rng(8);

    SUBCASE("elementwise and reductions") {
        Tensor a = random_tensor(rng, {2, 3}, true);
        Tensor b = random_tensor(rng, {2, 3}, true);
        check_gradients({a, b}, [&](Tape* t) {
            Tensor s1 = ops::add(t, a, b);
            Tensor s2 = ops::sub(t, s1, b);
            Tensor s3 = ops::mul(t, s2, a);
            Tensor s4 = ops::scale(t, s3, -1.7);
            return ops::mean(t, s4);
        });
    }
    SUBCASE("activations") {
        // keep relu inputs away from the kink
        Tensor a = Tensor::from({1, 6}, {0.5, -0.7, 1.2, -0.01, 2.0, -2.0}, true);
        check_gradients({a}, [&](Tape* t) {
            return ops::sum(t, ops::relu(t, a));
        });
        Tensor c = random_tensor(rng, {2, 5}, true, -2.0, 2.0);
        check_gradients({c}, [&](Tape* t) {
            return ops::mean(t, ops::silu(t, c));
        });
    }
    SUBCASE("channel bias and concat") {
        Tensor x = random_tensor(rng, {2, 3, 2, 2}, true);
        Tensor bias = random_tensor(rng, {3}, true);
        Tensor y = random_tensor(rng, {2, 2, 2, 2}, true);
        check_gradients({x, bias, y}, [&](Tape* t) {
            Tensor xb = ops::add_channel_bias(t, x, bias);
            Tensor cat = ops::concat_channels(t, xb, y);
            return ops::mean(t, ops::silu(t, cat));
        });
    }
    SUBCASE("conv2d") {
        Tensor in = random_tensor(rng, {1, 2, 5, 5}, true);
        Tensor k = random_tensor(rng, {2, 2, 3, 3}, true);
        Tensor b = random_tensor(rng, {2}, true);
        check_gradients({in, k, b}, [&](Tape* t) {
            return ops::mean(t, ops::silu(t, ops::conv2d(t, in, k, b, 1, 1)));
        });
        check_gradients({in, k, b}, [&](Tape* t) {
            return ops::mean(t, ops::conv2d(t, in, k, b, 2, 1));
        });
    }
    SUBCASE("transposed_conv2d") {
        Tensor in = random_tensor(rng, {1, 2, 3, 3}, true);
        Tensor k = random_tensor(rng, {2, 2, 2, 2}, true);
        check_gradients({in, k}, [&](Tape* t) {
            return ops::mean(t, ops::silu(t, ops::transposed_conv2d(t, in, k, 2, 0)));
        });
    }
    SUBCASE("pool2d") {
        Tensor in = random_tensor(rng, {1, 2, 4, 4}, true);
        check_gradients({in}, [&](Tape* t) {
            return ops::mean(t, ops::pool2d(t, in, 2, ops::PoolMode::kMean));
        });
        // jitter to keep argmax unique so the FD is valid
        Tensor jit = Tensor::zeros({1, 1, 4, 4}, true);
        for (std::size_t i = 0; i < jit.size(); ++i) jit[i] = 0.05 * double(i) + rng.uniform();
        check_gradients({jit}, [&](Tape* t) {
            return ops::sum(t, ops::pool2d(t, jit, 2, ops::PoolMode::kMax));
        });
    }
    SUBCASE("linear and reshape") {
        Tensor in = random_tensor(rng, {2, 3}, true);
        Tensor w = random_tensor(rng, {3, 4}, true);
        Tensor b = random_tensor(rng, {4}, true);
        check_gradients({in, w, b}, [&](Tape* t) {
            Tensor y = ops::linear(t, in, w, b);
            Tensor r = ops::reshape(t, y, {4, 2});
            return ops::mean(t, ops::mul(t, r, r));
        });
    }
}

TEST_CASE("forward is bit-identical across repeated runs") {
    Rng rng(9);
    Tensor in = random_tensor(rng, {1, 2, 8, 8});
    Tensor k = random_tensor(rng, {4, 2, 3, 3});
    Tensor b = random_tensor(rng, {4});
    Tensor r1 = ops::conv2d(nullptr, in, k, b, 1, 1);
    Tensor r2 = ops::conv2d(nullptr, in, k, b, 1, 1);
    CHECK(std::memcmp(r1.values().data(), r2.values().data(), r1.size() * 8) == 0);
}

TEST_CASE("tensor validity check flags non-finite values") {
    Tensor t = Tensor::from({2}, {1.0, 2.0});
    CHECK(t.all_finite());
    t[1] = std::nan("");
    CHECK(!t.all_finite());
}

TEST_CASE("checkpoint round-trip is bit-exact") {
    Rng rng(10);
    ParamMap params;
    params["enc.conv.w"] = random_tensor(rng, {3, 2, 3, 3});
    params["enc.conv.b"] = random_tensor(rng, {3});
    params["meta.t"] = Tensor::scalar(2000);
    params["odd"] = Tensor::from({4}, {-0.0, 1e-308, -3.5, 7.25e17});

    const fs::path path = fs::temp_directory_path() / "lowlight_ckpt_test.bin";
    save_checkpoint(path.string(), params);
    ParamMap back = load_checkpoint(path.string());
    REQUIRE(back.size() == params.size());
    for (const auto& [name, t] : params) {
        REQUIRE(back.count(name) == 1);
        const Tensor& u = back[name];
        REQUIRE(u.shape() == t.shape());
        CHECK(std::memcmp(u.values().data(), t.values().data(), t.size() * 8) == 0);
    }
    fs::remove(path);
}

TEST_CASE("checkpoint rejects foreign bytes") {
    const fs::path path = fs::temp_directory_path() / "lowlight_ckpt_bad.bin";
    {
        std::FILE* f = std::fopen(path.c_str(), "wb");
        std::fputs("P5\n2 2\n255\nxxxx", f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(load_checkpoint(path.string()), DataError);
    fs::remove(path);
}
