#include "lowlight/denoiser.hpp"

#include <algorithm>
#include <cmath>

#include "lowlight/ops.hpp"

namespace lowlight::denoiser {

namespace {

// The sinusoidal encoder sees gamma stretched to a position-like range;
// raw gamma in (0,1] would leave the fast frequencies unused.
constexpr double kGammaScale = 1000.0;

const Tensor& param(const ParamMap& params, const std::string& name) {
    auto it = params.find(name);
    if (it == params.end()) throw DataError("missing parameter: " + name);
    return it->second;
}

void validate(const DenoiserConfig& cfg) {
    if (cfg.depth < 1) throw ContractError("denoiser: depth must be >= 1");
    if (cfg.base_channels < 1) throw ContractError("denoiser: base_channels must be >= 1");
    if (cfg.time_embed_dim < 2 || cfg.time_embed_dim % 2 != 0)
        throw ContractError("denoiser: time_embed_dim must be even and >= 2");
    if (cfg.image_size % (1 << cfg.depth) != 0)
        throw ContractError("denoiser: image_size must be divisible by 2^depth");
    if (cfg.dropout < 0.0 || cfg.dropout >= 1.0)
        throw ContractError("denoiser: dropout must be in [0,1)");
}

struct ParamSpec {
    std::string name;
    std::vector<std::size_t> shape;
    std::size_t fan_in;
};

void push_conv(std::vector<ParamSpec>& specs, const std::string& prefix, std::size_t cout,
               std::size_t cin, std::size_t k) {
    specs.push_back({prefix + ".w", {cout, cin, k, k}, cin * k * k});
    specs.push_back({prefix + ".b", {cout}, cin * k * k});
}

void push_linear(std::vector<ParamSpec>& specs, const std::string& prefix, std::size_t d,
                 std::size_t e) {
    specs.push_back({prefix + ".w", {d, e}, d});
    specs.push_back({prefix + ".b", {e}, d});
}

void push_resblock(std::vector<ParamSpec>& specs, const std::string& prefix, std::size_t cin,
                   std::size_t cout, std::size_t dim) {
    push_conv(specs, prefix + ".conv1", cout, cin, 3);
    push_linear(specs, prefix + ".temb", dim, cout);
    push_conv(specs, prefix + ".conv2", cout, cout, 3);
    if (cin != cout) push_conv(specs, prefix + ".skip", cout, cin, 1);
}

std::vector<ParamSpec> architecture(const DenoiserConfig& cfg) {
    const std::size_t dim = std::size_t(cfg.time_embed_dim);
    auto ch = [&](int i) { return std::size_t(level_channels(cfg, i)); };
    std::vector<ParamSpec> specs;
    push_conv(specs, "stem", ch(0), 2, 3);
    push_linear(specs, "temb.fc1", dim, dim);
    push_linear(specs, "temb.fc2", dim, dim);
    if (cfg.fag_enabled) {
        push_conv(specs, "guide0", ch(0), 1, 3);
        for (int i = 1; i <= cfg.depth; ++i)
            push_conv(specs, "guide" + std::to_string(i), ch(i - 1), 1, 3);
    }
    for (int i = 0; i < cfg.depth; ++i)
        push_resblock(specs, "enc" + std::to_string(i), ch(std::max(i - 1, 0)), ch(i), dim);
    push_resblock(specs, "mid", ch(cfg.depth - 1), ch(cfg.depth), dim);
    for (int i = cfg.depth - 1; i >= 0; --i) {
        const std::string p = "dec" + std::to_string(i);
        // transposed kernel layout is [Cin, Cout, k, k]
        specs.push_back({p + ".up.w",
                         {ch(i + 1), ch(i), 2, 2},
                         ch(i + 1) * 4});
        specs.push_back({p + ".up.b", {ch(i)}, ch(i + 1) * 4});
        push_resblock(specs, p, 2 * ch(i), ch(i), dim);
    }
    push_conv(specs, "out", 1, ch(0), 3);
    return specs;
}

}  // namespace

int level_channels(const DenoiserConfig& cfg, int level) {
    return cfg.base_channels << level;
}

Tensor sinusoidal_embed(double t, int dim) {
    if (dim < 2 || dim % 2 != 0)
        throw ContractError("sinusoidal_embed: dim must be even and >= 2");
    const int half = dim / 2;
    Tensor out = Tensor::zeros({1, std::size_t(dim)});
    for (int k = 0; k < half; ++k) {
        const double omega =
            half == 1 ? 1.0 : std::exp(-std::log(10000.0) * double(k) / double(half - 1));
        out[std::size_t(k)] = std::sin(t * omega);
        out[std::size_t(half + k)] = std::cos(t * omega);
    }
    return out;
}

ParamMap init_params(const DenoiserConfig& cfg, Rng& rng) {
    validate(cfg);
    ParamMap params;
    for (const ParamSpec& spec : architecture(cfg)) {
        const double bound = std::sqrt(1.0 / double(spec.fan_in));
        Tensor t = Tensor::zeros(spec.shape, true);
        for (double& v : t.values()) v = rng.uniform(-bound, bound);
        params.emplace(spec.name, std::move(t));
    }
    return params;
}

Tensor forward(Tape* tape, const ParamMap& params, const DenoiserConfig& cfg, const Tensor& l,
               const Tensor& ht, double gamma_t, const Tensor& guidance, Rng* dropout_rng,
               ForwardTrace* trace) {
    validate(cfg);
    if (l.rank() != 4 || ht.rank() != 4 || l.shape() != ht.shape())
        throw DimensionError("denoiser: l and ht must share [N,1,H,W]");
    if (l.shape()[1] != 1) throw DimensionError("denoiser: inputs must be single-channel");
    if (l.shape()[2] % (1u << cfg.depth) != 0 || l.shape()[3] % (1u << cfg.depth) != 0)
        throw ContractError("denoiser: spatial extent must be divisible by 2^depth");
    if (cfg.fag_enabled && guidance.shape() != l.shape())
        throw DimensionError("denoiser: guidance must match input extent");

    auto p = [&](const std::string& name) -> const Tensor& { return param(params, name); };
    auto ch = [&](int i) { return std::size_t(level_channels(cfg, i)); };

    // time conditioning trunk
    Tensor temb = sinusoidal_embed(gamma_t * kGammaScale, cfg.time_embed_dim);
    temb = ops::linear(tape, temb, p("temb.fc1.w"), p("temb.fc1.b"));
    temb = ops::silu(tape, temb);
    temb = ops::linear(tape, temb, p("temb.fc2.w"), p("temb.fc2.b"));

    auto resblock = [&](const Tensor& x, const std::string& prefix, std::size_t cin,
                        std::size_t cout) {
        Tensor h = ops::conv2d(tape, x, p(prefix + ".conv1.w"), p(prefix + ".conv1.b"), 1, 1);
        Tensor proj = ops::linear(tape, temb, p(prefix + ".temb.w"), p(prefix + ".temb.b"));
        h = ops::add_channel_bias(tape, h, ops::reshape(tape, proj, {cout}));
        h = ops::silu(tape, h);
        if (dropout_rng && cfg.dropout > 0.0) {
            Tensor mask = Tensor::zeros(h.shape());
            const double keep = 1.0 - cfg.dropout;
            for (double& v : mask.values())
                v = dropout_rng->uniform() < keep ? 1.0 / keep : 0.0;
            h = ops::mul(tape, h, mask);
        }
        h = ops::conv2d(tape, h, p(prefix + ".conv2.w"), p(prefix + ".conv2.b"), 1, 1);
        Tensor shortcut =
            cin == cout
                ? x
                : ops::conv2d(tape, x, p(prefix + ".skip.w"), p(prefix + ".skip.b"), 1, 0);
        return ops::add(tape, h, shortcut);
    };
    auto inject_guidance = [&](Tensor x, int scale_level) {
        if (!cfg.fag_enabled) return x;
        const std::string name = "guide" + std::to_string(scale_level);
        Tensor g = ops::conv2d(tape, guidance, p(name + ".w"), p(name + ".b"),
                               1 << scale_level, 1);
        return ops::add(tape, x, g);
    };

    Tensor x = ops::concat_channels(tape, l, ht);
    x = ops::conv2d(tape, x, p("stem.w"), p("stem.b"), 1, 1);
    x = inject_guidance(x, 0);

    std::vector<Tensor> skips;
    for (int i = 0; i < cfg.depth; ++i) {
        x = resblock(x, "enc" + std::to_string(i), ch(std::max(i - 1, 0)), ch(i));
        skips.push_back(x);
        if (trace) trace->encoder_skips.push_back(x.node());
        x = ops::pool2d(tape, x, 2, ops::PoolMode::kMean);
        x = inject_guidance(x, i + 1);
    }

    x = resblock(x, "mid", ch(cfg.depth - 1), ch(cfg.depth));

    for (int i = cfg.depth - 1; i >= 0; --i) {
        const std::string prefix = "dec" + std::to_string(i);
        x = ops::transposed_conv2d(tape, x, p(prefix + ".up.w"), 2, 0);
        x = ops::add_channel_bias(tape, x, p(prefix + ".up.b"));
        const Tensor& skip = skips[std::size_t(i)];
        if (trace) trace->decoder_consumed.push_back(skip.node());
        x = ops::concat_channels(tape, x, skip);
        x = resblock(x, prefix, 2 * ch(i), ch(i));
    }

    return ops::conv2d(tape, x, p("out.w"), p("out.b"), 1, 1);
}

}  // namespace lowlight::denoiser
