#pragma once

#include <string>
#include <vector>

#include "lowlight/checkpoint.hpp"
#include "lowlight/denoiser.hpp"
#include "lowlight/diffusion.hpp"
#include "lowlight/image.hpp"
#include "lowlight/metrics.hpp"
#include "lowlight/rng.hpp"

namespace lowlight::trainer {

struct LrSchedule {
    int warmup_steps = 0;
    double peak_lr = 0.0;
    int total_steps = 0;
};

// Linear ramp 0 -> peak over warmup, then cosine decay to 0 at total_steps.
double lr_at(int step, const LrSchedule& sched);

struct SynthSceneSpec {
    std::uint64_t seed = 0;
    int size = 32;
    int shape_count = 3;
    double gain = 0.25;     // low-light multiplicative darkening
    double gamma = 1.8;     // tone-curve exponent applied before the gain
    double sigma = 0.02;    // additive sensor-noise level
};

// Bright convex shapes and one shaded panel on black, plus the degraded
// counterpart: low = clamp(gain * normal^gamma + noise, 0, 1).
img::ImagePair synth_pair(const SynthSceneSpec& spec);

struct TrainConfig {
    denoiser::DenoiserConfig net;
    int timesteps = 200;
    double schedule_offset = 0.008;
    double fag_lambda = 0.5773502691896258;  // 1/sqrt(3)
    double fag_cutoff = 20.0;
    int epochs = 10;
    int batch_size = 4;
    double peak_lr = 1e-4;
    int warmup_steps = 100;
    std::uint64_t seed = 1;
    int checkpoint_every = 0;  // 0 disables periodic saves
    std::string checkpoint_prefix;
};

struct EpochStat {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainResult {
    ParamMap params;
    std::vector<EpochStat> curve;
};

// Adam moment state per parameter tensor.
struct Adam {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long step = 0;
    std::map<std::string, std::vector<double>> m, v;

    void update(ParamMap& params, double lr);
};

TrainResult train(const TrainConfig& cfg, const std::vector<img::ImagePair>& train_set,
                  const std::vector<img::ImagePair>& val_set);

// Per-pair metric rows of sampled enhancements against ground truth; the
// low-light input's own row is kept for baseline comparison.
struct EvalRow {
    metrics::MetricRow enhanced;
    metrics::MetricRow raw_low;
};

std::vector<EvalRow> evaluate(const ParamMap& params, const TrainConfig& cfg,
                              const std::vector<img::ImagePair>& test_set, Rng& rng);

// Guidance tensor for a grayscale conditioning image under the config.
Tensor guidance_for(const img::GrayImage& low, const TrainConfig& cfg);

// Net closure over fixed parameters and per-image guidance.
diffusion::NetFn make_net(const ParamMap& params, const denoiser::DenoiserConfig& net_cfg,
                          Tensor guidance, Rng* dropout_rng = nullptr);

void write_curve_csv(const std::string& path, const std::vector<EpochStat>& curve);

}  // namespace lowlight::trainer
