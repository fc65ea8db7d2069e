#include "lowlight/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "lowlight/kernels.hpp"

namespace lowlight::ops {

namespace {

using kernels::active;

bool track(const Tape* tape, std::initializer_list<const Tensor*> inputs) {
    if (!tape) return false;
    for (const Tensor* t : inputs)
        if (t->requires_grad()) return true;
    return false;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": operand shapes differ");
}

// dst[i] += g[i] * x[i]
void accumulate_product(double* dst, const double* g, const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] += g[i] * x[i];
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct ConvGeom {
    std::size_t n, c, h, w;       // input
    std::size_t f, kh, kw;        // kernel
    std::size_t oh, ow;           // output
    int stride, pad;
};

ConvGeom conv_geometry(const Tensor& input, const Tensor& kernel, int stride, int padding) {
    if (input.rank() != 4) throw DimensionError("conv2d: input must be [N,C,H,W]");
    if (kernel.rank() != 4) throw DimensionError("conv2d: kernel must be [F,C,kh,kw]");
    if (stride < 1) throw DimensionError("conv2d: stride must be >= 1");
    if (padding < 0) throw DimensionError("conv2d: padding must be >= 0");
    ConvGeom g;
    g.n = input.shape()[0];
    g.c = input.shape()[1];
    g.h = input.shape()[2];
    g.w = input.shape()[3];
    g.f = kernel.shape()[0];
    g.kh = kernel.shape()[2];
    g.kw = kernel.shape()[3];
    g.stride = stride;
    g.pad = padding;
    if (kernel.shape()[1] != g.c) throw DimensionError("conv2d: kernel channel count mismatch");
    if (g.kh > g.h + 2 * static_cast<std::size_t>(padding) ||
        g.kw > g.w + 2 * static_cast<std::size_t>(padding))
        throw DimensionError("conv2d: kernel larger than padded input");
    g.oh = (g.h + 2 * padding - g.kh) / stride + 1;
    g.ow = (g.w + 2 * padding - g.kw) / stride + 1;
    return g;
}

}  // namespace

Tensor add(Tape* tape, const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor out = Tensor::zeros(a.shape(), track(tape, {&a, &b}));
    active().add(out.values().data(), a.values().data(), b.values().data(), a.size());
    if (out.requires_grad()) {
        tape->record({a, b}, out, [a, b, out]() mutable {
            auto g = out.grad();
            if (a.requires_grad())
                active().axpy(a.grad().data(), 1.0, g.data(), g.size());
            if (b.requires_grad())
                active().axpy(b.grad().data(), 1.0, g.data(), g.size());
        });
    }
    return out;
}

Tensor sub(Tape* tape, const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    Tensor out = Tensor::zeros(a.shape(), track(tape, {&a, &b}));
    active().sub(out.values().data(), a.values().data(), b.values().data(), a.size());
    if (out.requires_grad()) {
        tape->record({a, b}, out, [a, b, out]() mutable {
            auto g = out.grad();
            if (a.requires_grad())
                active().axpy(a.grad().data(), 1.0, g.data(), g.size());
            if (b.requires_grad())
                active().axpy(b.grad().data(), -1.0, g.data(), g.size());
        });
    }
    return out;
}

Tensor mul(Tape* tape, const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    Tensor out = Tensor::zeros(a.shape(), track(tape, {&a, &b}));
    active().mul(out.values().data(), a.values().data(), b.values().data(), a.size());
    if (out.requires_grad()) {
        tape->record({a, b}, out, [a, b, out]() mutable {
            auto g = out.grad();
            if (a.requires_grad())
                accumulate_product(a.grad().data(), g.data(), b.values().data(), g.size());
            if (b.requires_grad())
                accumulate_product(b.grad().data(), g.data(), a.values().data(), g.size());
        });
    }
    return out;
}

Tensor scale(Tape* tape, const Tensor& a, double s) {
    Tensor out = Tensor::zeros(a.shape(), track(tape, {&a}));
    active().scale(out.values().data(), a.values().data(), s, a.size());
    if (out.requires_grad()) {
        tape->record({a}, out, [a, out, s]() mutable {
            active().axpy(a.grad().data(), s, out.grad().data(), out.size());
        });
    }
    return out;
}

Tensor add_channel_bias(Tape* tape, const Tensor& x, const Tensor& bias) {
    if (x.rank() != 4) throw DimensionError("add_channel_bias: input must be [N,C,H,W]");
    if (bias.rank() != 1 || bias.shape()[0] != x.shape()[1])
        throw DimensionError("add_channel_bias: bias extent must equal channel count");
    const std::size_t n = x.shape()[0], c = x.shape()[1];
    const std::size_t plane = x.shape()[2] * x.shape()[3];
    Tensor out = Tensor::zeros(x.shape(), track(tape, {&x, &bias}));
    const double* in = x.values().data();
    double* o = out.values().data();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < c; ++j) {
            const double b = bias[j];
            const std::size_t base = (i * c + j) * plane;
            for (std::size_t k = 0; k < plane; ++k) o[base + k] = in[base + k] + b;
        }
    if (out.requires_grad()) {
        tape->record({x, bias}, out, [x, bias, out, n, c, plane]() mutable {
            auto g = out.grad();
            if (x.requires_grad())
                active().axpy(x.grad().data(), 1.0, g.data(), g.size());
            if (bias.requires_grad()) {
                auto bg = bias.grad();
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < c; ++j)
                        bg[j] += active().sum(g.data() + (i * c + j) * plane, plane);
            }
        });
    }
    return out;
}

Tensor relu(Tape* tape, const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape(), track(tape, {&x}));
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
    if (out.requires_grad()) {
        tape->record({x}, out, [x, out]() mutable {
            auto g = out.grad();
            auto xg = x.grad();
            for (std::size_t i = 0; i < g.size(); ++i)
                if (x[i] > 0.0) xg[i] += g[i];
        });
    }
    return out;
}

Tensor silu(Tape* tape, const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape(), track(tape, {&x}));
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * sigmoid(x[i]);
    if (out.requires_grad()) {
        tape->record({x}, out, [x, out]() mutable {
            auto g = out.grad();
            auto xg = x.grad();
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double s = sigmoid(x[i]);
                xg[i] += g[i] * s * (1.0 + x[i] * (1.0 - s));
            }
        });
    }
    return out;
}

Tensor concat_channels(Tape* tape, const Tensor& a, const Tensor& b) {
    if (a.rank() != 4 || b.rank() != 4)
        throw DimensionError("concat_channels: inputs must be [N,C,H,W]");
    if (a.shape()[0] != b.shape()[0] || a.shape()[2] != b.shape()[2] ||
        a.shape()[3] != b.shape()[3])
        throw DimensionError("concat_channels: non-channel extents differ");
    const std::size_t n = a.shape()[0], ca = a.shape()[1], cb = b.shape()[1];
    const std::size_t plane = a.shape()[2] * a.shape()[3];
    Tensor out = Tensor::zeros({n, ca + cb, a.shape()[2], a.shape()[3]}, track(tape, {&a, &b}));
    double* o = out.values().data();
    for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(a.values().data() + i * ca * plane, ca * plane, o + i * (ca + cb) * plane);
        std::copy_n(b.values().data() + i * cb * plane, cb * plane,
                    o + (i * (ca + cb) + ca) * plane);
    }
    if (out.requires_grad()) {
        tape->record({a, b}, out, [a, b, out, n, ca, cb, plane]() mutable {
            auto g = out.grad();
            for (std::size_t i = 0; i < n; ++i) {
                if (a.requires_grad())
                    active().axpy(a.grad().data() + i * ca * plane, 1.0,
                                  g.data() + i * (ca + cb) * plane, ca * plane);
                if (b.requires_grad())
                    active().axpy(b.grad().data() + i * cb * plane, 1.0,
                                  g.data() + (i * (ca + cb) + ca) * plane, cb * plane);
            }
        });
    }
    return out;
}

Tensor sum(Tape* tape, const Tensor& x) {
    Tensor out = Tensor::from({1}, {active().sum(x.values().data(), x.size())},
                              track(tape, {&x}));
    if (out.requires_grad()) {
        tape->record({x}, out, [x, out]() mutable {
            const double g = out.grad()[0];
            auto xg = x.grad();
            for (double& v : xg) v += g;
        });
    }
    return out;
}

Tensor mean(Tape* tape, const Tensor& x) {
    const double inv = 1.0 / static_cast<double>(x.size());
    Tensor out = Tensor::from({1}, {active().sum(x.values().data(), x.size()) * inv},
                              track(tape, {&x}));
    if (out.requires_grad()) {
        tape->record({x}, out, [x, out, inv]() mutable {
            const double g = out.grad()[0] * inv;
            auto xg = x.grad();
            for (double& v : xg) v += g;
        });
    }
    return out;
}

Tensor reshape(Tape* tape, const Tensor& x, std::vector<std::size_t> shape) {
    if (Tensor::numel(shape) != x.size())
        throw DimensionError("reshape: element count changes");
    Tensor out = Tensor::from(std::move(shape),
                              std::vector<double>(x.values().begin(), x.values().end()),
                              track(tape, {&x}));
    if (out.requires_grad()) {
        tape->record({x}, out, [x, out]() mutable {
            active().axpy(x.grad().data(), 1.0, out.grad().data(), out.size());
        });
    }
    return out;
}

Tensor conv2d(Tape* tape, const Tensor& input, const Tensor& kernel, const Tensor& bias,
              int stride, int padding) {
    const ConvGeom g = conv_geometry(input, kernel, stride, padding);
    if (bias.rank() != 1 || bias.shape()[0] != g.f)
        throw DimensionError("conv2d: bias extent must equal filter count");

    Tensor out = Tensor::zeros({g.n, g.f, g.oh, g.ow}, track(tape, {&input, &kernel, &bias}));
    const double* in = input.values().data();
    const double* k = kernel.values().data();
    double* o = out.values().data();

    for (std::size_t n = 0; n < g.n; ++n) {
        for (std::size_t f = 0; f < g.f; ++f) {
            double* out_plane = o + (n * g.f + f) * g.oh * g.ow;
            const double b = bias[f];
            for (std::size_t i = 0; i < g.oh * g.ow; ++i) out_plane[i] = b;
            for (std::size_t c = 0; c < g.c; ++c) {
                const double* in_plane = in + (n * g.c + c) * g.h * g.w;
                for (std::size_t ky = 0; ky < g.kh; ++ky) {
                    for (std::size_t kx = 0; kx < g.kw; ++kx) {
                        const double w = k[((f * g.c + c) * g.kh + ky) * g.kw + kx];
                        for (std::size_t oy = 0; oy < g.oh; ++oy) {
                            const std::int64_t iy = static_cast<std::int64_t>(oy) * g.stride -
                                                    g.pad + static_cast<std::int64_t>(ky);
                            if (iy < 0 || iy >= static_cast<std::int64_t>(g.h)) continue;
                            const double* in_row = in_plane + iy * g.w;
                            double* out_row = out_plane + oy * g.ow;
                            if (g.stride == 1) {
                                const std::int64_t off = static_cast<std::int64_t>(kx) - g.pad;
                                const std::int64_t ox0 = std::max<std::int64_t>(0, -off);
                                const std::int64_t ox1 = std::min<std::int64_t>(
                                    g.ow - 1, static_cast<std::int64_t>(g.w) - 1 - off);
                                if (ox0 <= ox1)
                                    active().axpy(out_row + ox0, w, in_row + ox0 + off,
                                                  ox1 - ox0 + 1);
                            } else {
                                for (std::size_t ox = 0; ox < g.ow; ++ox) {
                                    const std::int64_t ix =
                                        static_cast<std::int64_t>(ox) * g.stride - g.pad +
                                        static_cast<std::int64_t>(kx);
                                    if (ix < 0 || ix >= static_cast<std::int64_t>(g.w)) continue;
                                    out_row[ox] += w * in_row[ix];
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    if (out.requires_grad()) {
        Tensor in_t = input, k_t = kernel, b_t = bias;
        tape->record({input, kernel, bias}, out, [in_t, k_t, b_t, out, g]() mutable {
            auto og = out.grad();
            const double* go = og.data();
            const double* in = in_t.values().data();
            const double* k = k_t.values().data();
            const bool want_in = in_t.requires_grad();
            const bool want_k = k_t.requires_grad();
            const bool want_b = b_t.requires_grad();
            double* gin = want_in ? in_t.grad().data() : nullptr;
            double* gk = want_k ? k_t.grad().data() : nullptr;

            if (want_b) {
                auto bg = b_t.grad();
                for (std::size_t n = 0; n < g.n; ++n)
                    for (std::size_t f = 0; f < g.f; ++f)
                        bg[f] += active().sum(go + (n * g.f + f) * g.oh * g.ow, g.oh * g.ow);
            }
            if (!want_in && !want_k) return;

            for (std::size_t n = 0; n < g.n; ++n) {
                for (std::size_t f = 0; f < g.f; ++f) {
                    const double* go_plane = go + (n * g.f + f) * g.oh * g.ow;
                    for (std::size_t c = 0; c < g.c; ++c) {
                        const double* in_plane = in + (n * g.c + c) * g.h * g.w;
                        double* gin_plane = want_in ? gin + (n * g.c + c) * g.h * g.w : nullptr;
                        for (std::size_t ky = 0; ky < g.kh; ++ky) {
                            for (std::size_t kx = 0; kx < g.kw; ++kx) {
                                const std::size_t kidx = ((f * g.c + c) * g.kh + ky) * g.kw + kx;
                                const double w = k[kidx];
                                double kacc = 0.0;
                                for (std::size_t oy = 0; oy < g.oh; ++oy) {
                                    const std::int64_t iy =
                                        static_cast<std::int64_t>(oy) * g.stride - g.pad +
                                        static_cast<std::int64_t>(ky);
                                    if (iy < 0 || iy >= static_cast<std::int64_t>(g.h)) continue;
                                    const double* go_row = go_plane + oy * g.ow;
                                    if (g.stride == 1) {
                                        const std::int64_t off =
                                            static_cast<std::int64_t>(kx) - g.pad;
                                        const std::int64_t ox0 = std::max<std::int64_t>(0, -off);
                                        const std::int64_t ox1 = std::min<std::int64_t>(
                                            g.ow - 1, static_cast<std::int64_t>(g.w) - 1 - off);
                                        if (ox0 > ox1) continue;
                                        const std::size_t len = ox1 - ox0 + 1;
                                        if (want_in)
                                            active().axpy(gin_plane + iy * g.w + ox0 + off, w,
                                                          go_row + ox0, len);
                                        if (want_k)
                                            kacc += active().dot(
                                                go_row + ox0,
                                                in_plane + iy * g.w + ox0 + off, len);
                                    } else {
                                        for (std::size_t ox = 0; ox < g.ow; ++ox) {
                                            const std::int64_t ix =
                                                static_cast<std::int64_t>(ox) * g.stride -
                                                g.pad + static_cast<std::int64_t>(kx);
                                            if (ix < 0 ||
                                                ix >= static_cast<std::int64_t>(g.w))
                                                continue;
                                            if (want_in)
                                                gin_plane[iy * g.w + ix] += w * go_row[ox];
                                            if (want_k)
                                                kacc += go_row[ox] * in_plane[iy * g.w + ix];
                                        }
                                    }
                                }
                                if (want_k) gk[kidx] += kacc;
                            }
                        }
                    }
                }
            }
        });
    }
    return out;
}

Tensor transposed_conv2d(Tape* tape, const Tensor& input, const Tensor& kernel, int stride,
                         int padding) {
    if (input.rank() != 4) throw DimensionError("transposed_conv2d: input must be [N,Cin,H,W]");
    if (kernel.rank() != 4)
        throw DimensionError("transposed_conv2d: kernel must be [Cin,Cout,kh,kw]");
    if (stride < 1) throw DimensionError("transposed_conv2d: stride must be >= 1");
    if (padding < 0) throw DimensionError("transposed_conv2d: padding must be >= 0");
    const std::size_t n = input.shape()[0], cin = input.shape()[1];
    const std::size_t h = input.shape()[2], w = input.shape()[3];
    if (kernel.shape()[0] != cin)
        throw DimensionError("transposed_conv2d: kernel input-channel mismatch");
    const std::size_t cout = kernel.shape()[1], kh = kernel.shape()[2], kw = kernel.shape()[3];
    const std::int64_t oh64 = static_cast<std::int64_t>(h - 1) * stride - 2 * padding + kh;
    const std::int64_t ow64 = static_cast<std::int64_t>(w - 1) * stride - 2 * padding + kw;
    if (oh64 < 1 || ow64 < 1) throw DimensionError("transposed_conv2d: empty output");
    const std::size_t oh = oh64, ow = ow64;

    Tensor out = Tensor::zeros({n, cout, oh, ow}, track(tape, {&input, &kernel}));
    const double* in = input.values().data();
    const double* k = kernel.values().data();
    double* o = out.values().data();

    // scatter: out[oy = iy*s + ky - p, ox = ix*s + kx - p] += w * in[iy, ix]
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t ci = 0; ci < cin; ++ci) {
            const double* in_plane = in + (b * cin + ci) * h * w;
            for (std::size_t co = 0; co < cout; ++co) {
                double* out_plane = o + (b * cout + co) * oh * ow;
                for (std::size_t ky = 0; ky < kh; ++ky) {
                    for (std::size_t kx = 0; kx < kw; ++kx) {
                        const double wv = k[((ci * cout + co) * kh + ky) * kw + kx];
                        for (std::size_t iy = 0; iy < h; ++iy) {
                            const std::int64_t oy = static_cast<std::int64_t>(iy) * stride +
                                                    static_cast<std::int64_t>(ky) - padding;
                            if (oy < 0 || oy >= static_cast<std::int64_t>(oh)) continue;
                            double* out_row = out_plane + oy * ow;
                            const double* in_row = in_plane + iy * w;
                            if (stride == 1) {
                                const std::int64_t off = static_cast<std::int64_t>(kx) - padding;
                                const std::int64_t ix0 = std::max<std::int64_t>(0, -off);
                                const std::int64_t ix1 = std::min<std::int64_t>(
                                    w - 1, static_cast<std::int64_t>(ow) - 1 - off);
                                if (ix0 <= ix1)
                                    active().axpy(out_row + ix0 + off, wv, in_row + ix0,
                                                  ix1 - ix0 + 1);
                            } else {
                                for (std::size_t ix = 0; ix < w; ++ix) {
                                    const std::int64_t ox =
                                        static_cast<std::int64_t>(ix) * stride +
                                        static_cast<std::int64_t>(kx) - padding;
                                    if (ox < 0 || ox >= static_cast<std::int64_t>(ow)) continue;
                                    out_row[ox] += wv * in_row[ix];
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    if (out.requires_grad()) {
        Tensor in_t = input, k_t = kernel;
        tape->record({input, kernel}, out,
                     [in_t, k_t, out, n, cin, cout, h, w, kh, kw, oh, ow, stride,
                      padding]() mutable {
            const double* go = out.grad().data();
            const double* in = in_t.values().data();
            const double* k = k_t.values().data();
            const bool want_in = in_t.requires_grad();
            const bool want_k = k_t.requires_grad();
            double* gin = want_in ? in_t.grad().data() : nullptr;
            double* gk = want_k ? k_t.grad().data() : nullptr;
            if (!want_in && !want_k) return;
            // gather form of the scatter above
            for (std::size_t b = 0; b < n; ++b) {
                for (std::size_t ci = 0; ci < cin; ++ci) {
                    const double* in_plane = in + (b * cin + ci) * h * w;
                    double* gin_plane = want_in ? gin + (b * cin + ci) * h * w : nullptr;
                    for (std::size_t co = 0; co < cout; ++co) {
                        const double* go_plane = go + (b * cout + co) * oh * ow;
                        for (std::size_t ky = 0; ky < kh; ++ky) {
                            for (std::size_t kx = 0; kx < kw; ++kx) {
                                const std::size_t kidx = ((ci * cout + co) * kh + ky) * kw + kx;
                                const double wv = k[kidx];
                                double kacc = 0.0;
                                for (std::size_t iy = 0; iy < h; ++iy) {
                                    const std::int64_t oy =
                                        static_cast<std::int64_t>(iy) * stride +
                                        static_cast<std::int64_t>(ky) - padding;
                                    if (oy < 0 || oy >= static_cast<std::int64_t>(oh)) continue;
                                    const double* go_row = go_plane + oy * ow;
                                    const double* in_row = in_plane + iy * w;
                                    for (std::size_t ix = 0; ix < w; ++ix) {
                                        const std::int64_t ox =
                                            static_cast<std::int64_t>(ix) * stride +
                                            static_cast<std::int64_t>(kx) - padding;
                                        if (ox < 0 || ox >= static_cast<std::int64_t>(ow))
                                            continue;
                                        if (want_in) gin_plane[iy * w + ix] += wv * go_row[ox];
                                        if (want_k) kacc += go_row[ox] * in_row[ix];
                                    }
                                }
                                if (want_k) gk[kidx] += kacc;
                            }
                        }
                    }
                }
            }
        });
    }
    return out;
}

Tensor pool2d(Tape* tape, const Tensor& input, int window, PoolMode mode) {
    if (input.rank() != 4) throw DimensionError("pool2d: input must be [N,C,H,W]");
    if (window < 1) throw DimensionError("pool2d: window must be >= 1");
    const std::size_t n = input.shape()[0], c = input.shape()[1];
    const std::size_t h = input.shape()[2], w = input.shape()[3];
    const std::size_t win = static_cast<std::size_t>(window);
    if (h % win != 0 || w % win != 0)
        throw DimensionError("pool2d: extents not divisible by window");
    const std::size_t oh = h / win, ow = w / win;

    Tensor out = Tensor::zeros({n, c, oh, ow}, track(tape, {&input}));
    const double* in = input.values().data();
    double* o = out.values().data();
    // argmax flat offsets within each input plane, first hit in row-major order
    auto argmax = std::make_shared<std::vector<std::size_t>>();
    if (mode == PoolMode::kMax) argmax->resize(out.size());

    const double inv = 1.0 / static_cast<double>(win * win);
    for (std::size_t b = 0; b < n * c; ++b) {
        const double* in_plane = in + b * h * w;
        double* out_plane = o + b * oh * ow;
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                if (mode == PoolMode::kMean) {
                    double acc = 0.0;
                    for (std::size_t dy = 0; dy < win; ++dy)
                        for (std::size_t dx = 0; dx < win; ++dx)
                            acc += in_plane[(oy * win + dy) * w + ox * win + dx];
                    out_plane[oy * ow + ox] = acc * inv;
                } else {
                    std::size_t best = (oy * win) * w + ox * win;
                    double bv = in_plane[best];
                    for (std::size_t dy = 0; dy < win; ++dy)
                        for (std::size_t dx = 0; dx < win; ++dx) {
                            const std::size_t idx = (oy * win + dy) * w + ox * win + dx;
                            if (in_plane[idx] > bv) {
                                bv = in_plane[idx];
                                best = idx;
                            }
                        }
                    out_plane[oy * ow + ox] = bv;
                    (*argmax)[b * oh * ow + oy * ow + ox] = best;
                }
            }
        }
    }

    if (out.requires_grad()) {
        Tensor in_t = input;
        tape->record({input}, out,
                     [in_t, out, argmax, mode, n, c, h, w, oh, ow, win, inv]() mutable {
            const double* go = out.grad().data();
            double* gin = in_t.grad().data();
            for (std::size_t b = 0; b < n * c; ++b) {
                double* gin_plane = gin + b * h * w;
                const double* go_plane = go + b * oh * ow;
                if (mode == PoolMode::kMean) {
                    for (std::size_t oy = 0; oy < oh; ++oy)
                        for (std::size_t ox = 0; ox < ow; ++ox) {
                            const double gv = go_plane[oy * ow + ox] * inv;
                            for (std::size_t dy = 0; dy < win; ++dy)
                                for (std::size_t dx = 0; dx < win; ++dx)
                                    gin_plane[(oy * win + dy) * w + ox * win + dx] += gv;
                        }
                } else {
                    for (std::size_t i = 0; i < oh * ow; ++i)
                        gin_plane[(*argmax)[b * oh * ow + i]] += go_plane[i];
                }
            }
        });
    }
    return out;
}

Tensor linear(Tape* tape, const Tensor& input, const Tensor& weight, const Tensor& bias) {
    if (input.rank() != 2) throw DimensionError("linear: input must be [N,D]");
    if (weight.rank() != 2) throw DimensionError("linear: weight must be [D,E]");
    const std::size_t n = input.shape()[0], d = input.shape()[1];
    if (weight.shape()[0] != d) throw DimensionError("linear: inner dimensions differ");
    const std::size_t e = weight.shape()[1];
    if (bias.rank() != 1 || bias.shape()[0] != e)
        throw DimensionError("linear: bias extent must equal output width");

    Tensor out = Tensor::zeros({n, e}, track(tape, {&input, &weight, &bias}));
    const double* in = input.values().data();
    const double* wt = weight.values().data();
    double* o = out.values().data();
    for (std::size_t i = 0; i < n; ++i) {
        double* row = o + i * e;
        std::copy_n(bias.values().data(), e, row);
        for (std::size_t j = 0; j < d; ++j) active().axpy(row, in[i * d + j], wt + j * e, e);
    }

    if (out.requires_grad()) {
        Tensor in_t = input, w_t = weight, b_t = bias;
        tape->record({input, weight, bias}, out, [in_t, w_t, b_t, out, n, d, e]() mutable {
            const double* go = out.grad().data();
            const double* in = in_t.values().data();
            const double* wt = w_t.values().data();
            if (b_t.requires_grad()) {
                auto bg = b_t.grad();
                for (std::size_t i = 0; i < n; ++i)
                    active().axpy(bg.data(), 1.0, go + i * e, e);
            }
            if (in_t.requires_grad()) {
                auto ig = in_t.grad();
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < d; ++j)
                        ig[i * d + j] += active().dot(go + i * e, wt + j * e, e);
            }
            if (w_t.requires_grad()) {
                auto wg = w_t.grad();
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < d; ++j)
                        active().axpy(wg.data() + j * e, in[i * d + j], go + i * e, e);
            }
        });
    }
    return out;
}

}  // namespace lowlight::ops
