#pragma once

#include <memory>
#include <string>
#include <vector>

#include "lowlight/checkpoint.hpp"
#include "lowlight/rng.hpp"
#include "lowlight/tensor.hpp"

namespace lowlight::denoiser {

struct DenoiserConfig {
    int base_channels = 16;
    int depth = 3;  // pool/upsample levels
    int time_embed_dim = 32;
    int image_size = 32;
    bool fag_enabled = true;
    double dropout = 0.0;  // applied only when a dropout rng is supplied
};

// Level widths: channels(i) = base_channels << i, i = 0..depth.
int level_channels(const DenoiserConfig& cfg, int level);

// [1, dim]: first half sin(t*w_k), second half cos(t*w_k); w_k geometric
// from 1 down to 1e-4. dim must be even and >= 2.
Tensor sinusoidal_embed(double t, int dim);

// Records which activations fed the skip concatenations, for structural tests.
struct ForwardTrace {
    std::vector<std::shared_ptr<detail::TensorNode>> encoder_skips;
    std::vector<std::shared_ptr<detail::TensorNode>> decoder_consumed;
};

// Parameter tensors keyed by layer name, all requiring grad, drawn uniform
// within +-sqrt(1/fan_in). Creation order is fixed for reproducibility.
ParamMap init_params(const DenoiserConfig& cfg, Rng& rng);

// Noise prediction for a batch: l, ht, guidance are [N,1,H,W]; returns
// [N,1,H,W]. The guidance tensor is ignored (and may be empty) when
// fag_enabled is false. dropout_rng enables train-mode dropout.
Tensor forward(Tape* tape, const ParamMap& params, const DenoiserConfig& cfg, const Tensor& l,
               const Tensor& ht, double gamma_t, const Tensor& guidance,
               Rng* dropout_rng = nullptr, ForwardTrace* trace = nullptr);

}  // namespace lowlight::denoiser
