#include "lowlight/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lowlight/ops.hpp"

namespace lowlight::diffusion {

namespace {

void check_step(int t, const NoiseSchedule& sched, const char* who) {
    if (t < 1 || t > sched.T) throw ContractError(std::string(who) + ": step out of range");
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* who) {
    if (a.shape() != b.shape()) throw DimensionError(std::string(who) + ": shape mismatch");
}

Tensor normal_like(const Tensor& ref, Rng& rng) {
    Tensor z = Tensor::zeros(ref.shape());
    for (double& v : z.values()) v = rng.normal();
    return z;
}

}  // namespace

NoiseSchedule cosine_schedule(int T, double offset) {
    if (T < 1) throw ContractError("cosine_schedule: T must be >= 1");
    if (offset <= 0) throw ContractError("cosine_schedule: offset must be positive");
    auto f = [&](int t) {
        const double x = (double(t) / T + offset) / (1.0 + offset) * std::numbers::pi / 2.0;
        const double c = std::cos(x);
        return c * c;
    };
    NoiseSchedule s;
    s.T = T;
    s.beta.assign(std::size_t(T) + 1, 0.0);
    s.alpha.assign(std::size_t(T) + 1, 1.0);
    s.gamma.assign(std::size_t(T) + 1, 1.0);
    for (int t = 1; t <= T; ++t) {
        s.beta[t] = std::min(1.0 - f(t) / f(t - 1), 0.999);
        s.alpha[t] = 1.0 - s.beta[t];
        s.gamma[t] = s.alpha[t] * s.gamma[t - 1];
    }
    return s;
}

Tensor forward_diffuse(const Tensor& h0, int t, const Tensor& eps, const NoiseSchedule& sched) {
    check_step(t, sched, "forward_diffuse");
    check_same_shape(h0, eps, "forward_diffuse");
    const double g = sched.gamma[t];
    const double a = std::sqrt(g), b = std::sqrt(1.0 - g);
    Tensor out = Tensor::zeros(h0.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * h0[i] + b * eps[i];
    return out;
}

Tensor compose_steps(const Tensor& h0, int t, const NoiseSchedule& sched, Rng& rng) {
    check_step(t, sched, "compose_steps");
    Tensor h = Tensor::from(h0.shape(), std::vector<double>(h0.values().begin(),
                                                            h0.values().end()));
    for (int s = 1; s <= t; ++s) {
        const double a = std::sqrt(sched.alpha[s]), b = std::sqrt(sched.beta[s]);
        for (double& v : h.values()) v = a * v + b * rng.normal();
    }
    return h;
}

PosteriorParams posterior_params(const Tensor& h0, const Tensor& ht, int t,
                                 const NoiseSchedule& sched) {
    check_step(t, sched, "posterior_params");
    check_same_shape(h0, ht, "posterior_params");
    const double a = sched.alpha[t];
    const double g = sched.gamma[t], gp = sched.gamma[t - 1];
    const double c_ht = std::sqrt(a) * (1.0 - gp) / (1.0 - g);
    const double c_h0 = std::sqrt(gp) * (1.0 - a) / (1.0 - g);
    PosteriorParams p;
    p.beta_tilde = (1.0 - gp) * (1.0 - a) / (1.0 - g);
    p.mu = Tensor::zeros(h0.shape());
    for (std::size_t i = 0; i < p.mu.size(); ++i) p.mu[i] = c_ht * ht[i] + c_h0 * h0[i];
    return p;
}

Tensor reverse_step(const Tensor& l, const Tensor& ht, int t, const NoiseSchedule& sched,
                    const NetFn& net, Rng& rng) {
    check_step(t, sched, "reverse_step");
    const Tensor eps_pred = net(nullptr, l, ht, sched.gamma[t]);
    if (eps_pred.shape() != ht.shape())
        throw ContractError("reverse_step: net output shape mismatch");
    const double a = sched.alpha[t];
    const double inv_sqrt_a = 1.0 / std::sqrt(a);
    const double coef = (1.0 - a) / std::sqrt(1.0 - sched.gamma[t]);
    const double beta_tilde =
        (1.0 - sched.gamma[t - 1]) * (1.0 - a) / (1.0 - sched.gamma[t]);
    Tensor out = Tensor::zeros(ht.shape());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = inv_sqrt_a * (ht[i] - coef * eps_pred[i]);
    if (t > 1) {
        const double sd = std::sqrt(beta_tilde);
        for (double& v : out.values()) v += sd * rng.normal();
    }
    return out;
}

img::GrayImage sample(const img::GrayImage& l, const NoiseSchedule& sched, const NetFn& net,
                      Rng& rng) {
    const Tensor lt = img::to_tensor(l);
    Tensor h = normal_like(lt, rng);
    for (int t = sched.T; t >= 1; --t) h = reverse_step(lt, h, t, sched, net, rng);
    return img::gray_from_tensor(h, true);
}

Tensor loss(Tape* tape, const NetFn& net, const Tensor& l, const Tensor& h0,
            const NoiseSchedule& sched, Rng& rng) {
    const int t = int(rng.uniform_index(std::size_t(sched.T))) + 1;
    const Tensor eps = normal_like(h0, rng);
    const Tensor ht = forward_diffuse(h0, t, eps, sched);
    Tensor pred = net(tape, l, ht, sched.gamma[t]);
    if (pred.shape() != h0.shape()) throw ContractError("loss: net output shape mismatch");
    Tensor diff = ops::sub(tape, pred, eps);
    return ops::mean(tape, ops::mul(tape, diff, diff));
}

}  // namespace lowlight::diffusion
