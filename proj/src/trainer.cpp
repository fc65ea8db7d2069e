#include "lowlight/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "lowlight/fag.hpp"
#include "lowlight/ops.hpp"

namespace lowlight::trainer {

namespace {

struct Vec2 {
    double x = 0.0, y = 0.0;
};

struct Polygon {
    std::vector<Vec2> verts;  // counterclockwise
    double brightness = 1.0;
};

struct Panel {
    Vec2 center;
    Vec2 half;      // half extents in the local frame
    double angle = 0.0;
    double b0 = 0.6, b1 = 0.9;  // shading ramp across local x
};

bool inside_polygon(const Polygon& poly, double x, double y) {
    const std::size_t n = poly.verts.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& a = poly.verts[i];
        const Vec2& b = poly.verts[(i + 1) % n];
        const double cross = (b.x - a.x) * (y - a.y) - (b.y - a.y) * (x - a.x);
        if (cross < 0.0) return false;
    }
    return true;
}

// brightness at a sample point, or a negative value when outside
double panel_shade(const Panel& p, double x, double y) {
    const double dx = x - p.center.x, dy = y - p.center.y;
    const double c = std::cos(p.angle), s = std::sin(p.angle);
    const double lx = c * dx + s * dy, ly = -s * dx + c * dy;
    if (std::abs(lx) > p.half.x || std::abs(ly) > p.half.y) return -1.0;
    const double t = (lx / p.half.x + 1.0) / 2.0;
    return p.b0 + (p.b1 - p.b0) * t;
}

void check_config(const TrainConfig& cfg) {
    if (cfg.timesteps < 1) throw ContractError("trainer: timesteps must be >= 1");
    if (cfg.epochs < 1) throw ContractError("trainer: epochs must be >= 1");
    if (cfg.batch_size < 1) throw ContractError("trainer: batch_size must be >= 1");
    if (cfg.peak_lr < 0) throw ContractError("trainer: peak_lr must be >= 0");
}

img::ImagePair augment_random(const img::ImagePair& pair, Rng& rng) {
    const std::size_t pick = rng.uniform_index(6);
    if (pick == 0) return pair;
    return img::augment(pair, static_cast<img::AugmentOp>(pick - 1));
}

}  // namespace

double lr_at(int step, const LrSchedule& sched) {
    if (sched.warmup_steps <= 0 || sched.warmup_steps >= sched.total_steps)
        throw ContractError("lr_at: need 0 < warmup_steps < total_steps");
    if (sched.peak_lr <= 0) throw ContractError("lr_at: peak_lr must be positive");
    if (step <= 0) return 0.0;
    if (step <= sched.warmup_steps)
        return sched.peak_lr * double(step) / double(sched.warmup_steps);
    if (step >= sched.total_steps) return 0.0;
    const double progress = double(step - sched.warmup_steps) /
                            double(sched.total_steps - sched.warmup_steps);
    return sched.peak_lr * (1.0 + std::cos(std::numbers::pi * progress)) / 2.0;
}

img::ImagePair synth_pair(const SynthSceneSpec& spec) {
    if (spec.size < 4) throw ContractError("synth_pair: size too small");
    if (spec.gain < 0.0 || spec.gain > 1.0) throw ContractError("synth_pair: gain in [0,1]");
    Rng rng(spec.seed);
    const double sz = double(spec.size);

    std::vector<Polygon> polys;
    for (int i = 0; i < spec.shape_count; ++i) {
        Polygon p;
        p.brightness = rng.uniform(0.55, 0.95);
        const double cx = rng.uniform(0.15, 0.85) * sz;
        const double cy = rng.uniform(0.15, 0.85) * sz;
        const double radius = rng.uniform(0.10, 0.28) * sz;
        const int nv = 3 + int(rng.uniform_index(4));
        for (int v = 0; v < nv; ++v) {
            const double ang =
                2.0 * std::numbers::pi * (double(v) + 0.35 * rng.uniform()) / double(nv);
            const double r = radius * rng.uniform(0.7, 1.0);
            p.verts.push_back({cx + r * std::cos(ang), cy + r * std::sin(ang)});
        }
        polys.push_back(std::move(p));
    }
    Panel panel;
    panel.center = {rng.uniform(0.3, 0.7) * sz, rng.uniform(0.3, 0.7) * sz};
    panel.half = {rng.uniform(0.15, 0.3) * sz, rng.uniform(0.08, 0.18) * sz};
    panel.angle = rng.uniform(0.0, std::numbers::pi);
    panel.b0 = rng.uniform(0.35, 0.55);
    panel.b1 = rng.uniform(0.75, 0.98);

    img::ImagePair pair;
    pair.high = img::GrayImage(std::size_t(spec.size), std::size_t(spec.size));
    constexpr int kSS = 4;  // supersamples per axis
    for (int py = 0; py < spec.size; ++py) {
        for (int px = 0; px < spec.size; ++px) {
            double acc = 0.0;
            for (int sy = 0; sy < kSS; ++sy) {
                for (int sx = 0; sx < kSS; ++sx) {
                    const double x = px + (sx + 0.5) / kSS;
                    const double y = py + (sy + 0.5) / kSS;
                    double v = 0.0;
                    v = std::max(v, panel_shade(panel, x, y));
                    for (const Polygon& p : polys)
                        if (inside_polygon(p, x, y)) v = std::max(v, p.brightness);
                    acc += std::max(v, 0.0);
                }
            }
            pair.high.at(std::size_t(px), std::size_t(py)) = acc / double(kSS * kSS);
        }
    }

    pair.low = img::GrayImage(std::size_t(spec.size), std::size_t(spec.size));
    for (std::size_t i = 0; i < pair.high.values.size(); ++i) {
        const double v = pair.high.values[i];
        const double toned = spec.gamma == 1.0 ? v : std::pow(v, spec.gamma);
        const double noisy = spec.gain * toned + spec.sigma * rng.normal();
        pair.low.values[i] = std::clamp(noisy, 0.0, 1.0);
    }
    return pair;
}

void Adam::update(ParamMap& params, double lr) {
    ++step;
    const double c1 = 1.0 - std::pow(beta1, double(step));
    const double c2 = 1.0 - std::pow(beta2, double(step));
    for (auto& [name, t] : params) {
        if (!t.requires_grad()) continue;
        auto g = t.grad();
        auto& mt = m[name];
        auto& vt = v[name];
        if (mt.size() != t.size()) mt.assign(t.size(), 0.0);
        if (vt.size() != t.size()) vt.assign(t.size(), 0.0);
        auto vals = t.values();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            mt[i] = beta1 * mt[i] + (1.0 - beta1) * g[i];
            vt[i] = beta2 * vt[i] + (1.0 - beta2) * g[i] * g[i];
            const double mhat = mt[i] / c1;
            const double vhat = vt[i] / c2;
            vals[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

Tensor guidance_for(const img::GrayImage& low, const TrainConfig& cfg) {
    if (!cfg.net.fag_enabled) return Tensor();
    const spectral::GuidanceMap map =
        spectral::fag(img::gray_to_rgb(low), cfg.fag_lambda, cfg.fag_cutoff);
    return img::to_tensor(map);
}

diffusion::NetFn make_net(const ParamMap& params, const denoiser::DenoiserConfig& net_cfg,
                          Tensor guidance, Rng* dropout_rng) {
    return [&params, net_cfg, guidance = std::move(guidance), dropout_rng](
               Tape* tape, const Tensor& l, const Tensor& ht, double gamma_t) {
        return denoiser::forward(tape, params, net_cfg, l, ht, gamma_t, guidance, dropout_rng);
    };
}

TrainResult train(const TrainConfig& cfg, const std::vector<img::ImagePair>& train_set,
                  const std::vector<img::ImagePair>& val_set) {
    check_config(cfg);
    if (train_set.empty()) throw DataError("train: empty training set");

    Rng rng(cfg.seed);
    Rng init_rng = rng.fork(1);
    Rng step_rng = rng.fork(2);

    TrainResult result;
    result.params = denoiser::init_params(cfg.net, init_rng);
    const diffusion::NoiseSchedule sched =
        diffusion::cosine_schedule(cfg.timesteps, cfg.schedule_offset);

    const int steps_per_epoch =
        int((train_set.size() + std::size_t(cfg.batch_size) - 1) / std::size_t(cfg.batch_size));
    LrSchedule lr_sched{cfg.warmup_steps, cfg.peak_lr, cfg.epochs * steps_per_epoch + 1};
    if (lr_sched.warmup_steps <= 0 || lr_sched.warmup_steps >= lr_sched.total_steps)
        lr_sched.warmup_steps = std::max(1, lr_sched.total_steps / 10);

    Adam adam;
    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    int global_step = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        // Fisher-Yates, driven by the run rng
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[step_rng.uniform_index(i)]);

        double epoch_loss = 0.0;
        int batch_count = 0;
        double last_lr = 0.0;
        for (std::size_t start = 0; start < order.size();
             start += std::size_t(cfg.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + std::size_t(cfg.batch_size));
            Tape tape;
            Tensor batch_loss;
            for (std::size_t k = start; k < end; ++k) {
                const img::ImagePair pair = augment_random(train_set[order[k]], step_rng);
                const Tensor l = img::to_tensor(pair.low);
                const Tensor h0 = img::to_tensor(pair.high);
                const Tensor guidance = guidance_for(pair.low, cfg);
                auto net = make_net(result.params, cfg.net, guidance, &step_rng);
                Tensor item = diffusion::loss(&tape, net, l, h0, sched, step_rng);
                batch_loss = batch_loss.defined() ? ops::add(&tape, batch_loss, item) : item;
            }
            batch_loss = ops::scale(&tape, batch_loss, 1.0 / double(end - start));
            const double loss_value = batch_loss.item();
            if (!std::isfinite(loss_value)) {
                std::fprintf(stderr,
                             "train: non-finite loss at epoch %d step %d (lr %.3e)\n", epoch,
                             global_step, last_lr);
                throw NumericError("train: loss is not finite");
            }
            tape.backward(batch_loss);
            ++global_step;
            last_lr = lr_at(global_step, lr_sched);
            adam.update(result.params, last_lr);
            for (auto& kv : result.params) kv.second.zero_grad();
            epoch_loss += loss_value;
            ++batch_count;
        }

        // fixed noise draws per item keep the curve comparable across epochs
        double val_loss = 0.0;
        if (!val_set.empty()) {
            for (std::size_t i = 0; i < val_set.size(); ++i) {
                Rng vr = Rng(cfg.seed ^ 0x76616cULL).fork(i);
                const Tensor l = img::to_tensor(val_set[i].low);
                const Tensor h0 = img::to_tensor(val_set[i].high);
                const Tensor guidance = guidance_for(val_set[i].low, cfg);
                auto net = make_net(result.params, cfg.net, guidance, nullptr);
                val_loss += diffusion::loss(nullptr, net, l, h0, sched, vr).item();
            }
            val_loss /= double(val_set.size());
        }

        result.curve.push_back(
            {epoch, last_lr, epoch_loss / double(batch_count), val_loss});

        if (cfg.checkpoint_every > 0 && !cfg.checkpoint_prefix.empty() &&
            epoch % cfg.checkpoint_every == 0) {
            save_checkpoint(cfg.checkpoint_prefix + "_epoch" + std::to_string(epoch) + ".ckpt",
                            result.params);
        }
    }
    return result;
}

std::vector<EvalRow> evaluate(const ParamMap& params, const TrainConfig& cfg,
                              const std::vector<img::ImagePair>& test_set, Rng& rng) {
    const diffusion::NoiseSchedule sched =
        diffusion::cosine_schedule(cfg.timesteps, cfg.schedule_offset);
    std::vector<EvalRow> rows;
    rows.reserve(test_set.size());
    for (const img::ImagePair& pair : test_set) {
        const Tensor guidance = guidance_for(pair.low, cfg);
        auto net = make_net(params, cfg.net, guidance, nullptr);
        Rng chain = rng.fork(rows.size());
        const img::GrayImage enhanced = diffusion::sample(pair.low, sched, net, chain);
        rows.push_back({metrics::all_metrics(enhanced, pair.high),
                        metrics::all_metrics(pair.low, pair.high)});
    }
    return rows;
}

void write_curve_csv(const std::string& path, const std::vector<EpochStat>& curve) {
    std::ofstream f(path);
    if (!f) throw DataError(path + ": cannot open for writing");
    f << "epoch,lr,train_loss,val_loss\n";
    char buf[160];
    for (const EpochStat& e : curve) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", e.epoch, e.lr, e.train_loss,
                      e.val_loss);
        f << buf;
    }
    if (!f) throw DataError(path + ": write failed");
}

}  // namespace lowlight::trainer
