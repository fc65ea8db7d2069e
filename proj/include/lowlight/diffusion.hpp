#pragma once

#include <functional>
#include <vector>

#include "lowlight/image.hpp"
#include "lowlight/rng.hpp"
#include "lowlight/tensor.hpp"

namespace lowlight::diffusion {

// Arrays are 1-indexed by step; index 0 holds the conventions beta[0]=0,
// alpha[0]=1, gamma[0]=1 so the t=1 boundary needs no special casing.
struct NoiseSchedule {
    int T = 0;
    std::vector<double> beta, alpha, gamma;
};

struct DiffusionState {
    Tensor h_t;
    int t = 0;
    Tensor eps;
};

// gamma follows the recurrence gamma[t] = alpha[t]*gamma[t-1] exactly, with
// beta derived from the cosine signal-retention curve and clipped at 0.999.
NoiseSchedule cosine_schedule(int T, double offset);

// h_t = sqrt(gamma_t) h0 + sqrt(1-gamma_t) eps
Tensor forward_diffuse(const Tensor& h0, int t, const Tensor& eps, const NoiseSchedule& sched);

// t single-step transitions h_s = sqrt(alpha_s) h_{s-1} + sqrt(beta_s) z_s;
// same marginal as forward_diffuse.
Tensor compose_steps(const Tensor& h0, int t, const NoiseSchedule& sched, Rng& rng);

struct PosteriorParams {
    Tensor mu;
    double beta_tilde = 0.0;
};

PosteriorParams posterior_params(const Tensor& h0, const Tensor& ht, int t,
                                 const NoiseSchedule& sched);

// Noise predictor: callable under an optional tape so the same network serves
// training (recorded) and sampling (tape = nullptr).
using NetFn = std::function<Tensor(Tape*, const Tensor& l, const Tensor& ht, double gamma_t)>;

// One denoising transition. Deterministic at t=1, otherwise adds the
// posterior-variance noise.
Tensor reverse_step(const Tensor& l, const Tensor& ht, int t, const NoiseSchedule& sched,
                    const NetFn& net, Rng& rng);

// Full chain from pure noise down to t=1, clamped to [0,1].
img::GrayImage sample(const img::GrayImage& l, const NoiseSchedule& sched, const NetFn& net,
                      Rng& rng);

// Denoising-score-matching objective: mean squared error between the
// predicted and the injected noise at a uniformly drawn step.
Tensor loss(Tape* tape, const NetFn& net, const Tensor& l, const Tensor& h0,
            const NoiseSchedule& sched, Rng& rng);

}  // namespace lowlight::diffusion
