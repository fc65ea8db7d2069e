#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "lowlight/diffusion.hpp"
#include "lowlight/rng.hpp"

using namespace lowlight;
using diffusion::cosine_schedule;
using diffusion::NoiseSchedule;

namespace {

Tensor random_unit_tensor(Rng& rng, std::vector<std::size_t> shape) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.values()) v = rng.uniform();
    return t;
}

// exact noise for a state at signal level gamma_t, given the clean image
diffusion::NetFn oracle_net(const Tensor& h0) {
    return [h0](Tape*, const Tensor&, const Tensor& ht, double gamma_t) {
        Tensor eps = Tensor::zeros(ht.shape());
        const double s = std::sqrt(gamma_t), n = std::sqrt(1.0 - gamma_t);
        for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = (ht[i] - s * h0[i]) / n;
        return eps;
    };
}

}  // namespace

TEST_CASE("cosine schedule satisfies its boundary and monotonicity properties") {
    const NoiseSchedule s = cosine_schedule(2000, 0.008);
    REQUIRE(s.T == 2000);
    REQUIRE(s.beta.size() == 2001);
    CHECK(s.beta[0] == 0.0);
    CHECK(s.alpha[0] == 1.0);
    CHECK(s.gamma[0] == 1.0);
    for (int t = 1; t <= 2000; ++t) {
        CHECK(s.beta[t] > 0.0);
        CHECK(s.beta[t] <= 0.999);
        CHECK(s.alpha[t] == 1.0 - s.beta[t]);
        CHECK(s.gamma[t] < s.gamma[t - 1]);
        if (t > 1) CHECK(s.beta[t] >= s.beta[t - 1]);
    }
    CHECK(s.gamma[2000] < 1e-3);
    CHECK(s.beta[2000] == 0.999);  // the final ratio exceeds the clip
}

TEST_CASE("gamma is the exact running product of alpha") {
    const NoiseSchedule s = cosine_schedule(500, 0.008);
    for (int t = 1; t <= 500; ++t) CHECK(s.gamma[t] == s.alpha[t] * s.gamma[t - 1]);
}

TEST_CASE("schedule construction rejects bad arguments") {
    CHECK_THROWS_AS(cosine_schedule(0, 0.008), ContractError);
    CHECK_THROWS_AS(cosine_schedule(-5, 0.008), ContractError);
    CHECK_THROWS_AS(cosine_schedule(10, 0.0), ContractError);
    CHECK_THROWS_AS(cosine_schedule(10, -0.1), ContractError);
}

TEST_CASE("forward jump equals its closed form") {
    Rng rng(2001);
    const NoiseSchedule s = cosine_schedule(100, 0.008);
    const Tensor h0 = random_unit_tensor(rng, {1, 1, 3, 3});
    Tensor eps = Tensor::zeros(h0.shape());
    for (double& v : eps.values()) v = rng.normal();
    for (int t : {1, 37, 100}) {
        const Tensor ht = diffusion::forward_diffuse(h0, t, eps, s);
        const double a = std::sqrt(s.gamma[t]), b = std::sqrt(1.0 - s.gamma[t]);
        for (std::size_t i = 0; i < ht.size(); ++i)
            CHECK(ht[i] == doctest::Approx(a * h0[i] + b * eps[i]).epsilon(1e-15));
    }
    CHECK_THROWS_AS(diffusion::forward_diffuse(h0, 0, eps, s), ContractError);
    CHECK_THROWS_AS(diffusion::forward_diffuse(h0, 101, eps, s), ContractError);
    Tensor bad = Tensor::zeros({1, 1, 2, 2});
    CHECK_THROWS_AS(diffusion::forward_diffuse(h0, 5, bad, s), DimensionError);
}

TEST_CASE("stepwise composition has the closed-form moments") {
    const NoiseSchedule s = cosine_schedule(50, 0.008);
    Rng rng(2002);
    const Tensor h0 = random_unit_tensor(rng, {1, 1, 2, 2});
    const std::size_t paths = 4000;

    for (int t : {5, 25, 50}) {
        double sum = 0.0, sum_sq = 0.0;
        const std::size_t n = paths * h0.size();
        const double root_gamma = std::sqrt(s.gamma[t]);
        for (std::size_t p = 0; p < paths; ++p) {
            const Tensor ht = diffusion::compose_steps(h0, t, s, rng);
            for (std::size_t i = 0; i < ht.size(); ++i) {
                const double resid = ht[i] - root_gamma * h0[i];
                sum += resid;
                sum_sq += resid * resid;
            }
        }
        const double var = 1.0 - s.gamma[t];
        const double mean_se = std::sqrt(var / double(n));
        CHECK(std::abs(sum / double(n)) <= 4.0 * mean_se);
        // variance of a squared normal is 2 var^2
        const double var_se = var * std::sqrt(2.0 / double(n));
        CHECK(std::abs(sum_sq / double(n) - var) <= 4.0 * var_se);
    }
}

TEST_CASE("posterior parameters collapse to the clean image at t=1") {
    Rng rng(2003);
    const NoiseSchedule s = cosine_schedule(100, 0.008);
    const Tensor h0 = random_unit_tensor(rng, {1, 1, 2, 3});
    Tensor eps = Tensor::zeros(h0.shape());
    for (double& v : eps.values()) v = rng.normal();
    const Tensor h1 = diffusion::forward_diffuse(h0, 1, eps, s);
    const diffusion::PosteriorParams p = diffusion::posterior_params(h0, h1, 1, s);
    CHECK(p.beta_tilde == 0.0);
    for (std::size_t i = 0; i < h0.size(); ++i)
        CHECK(p.mu[i] == doctest::Approx(h0[i]).epsilon(1e-12));
}

TEST_CASE("posterior mean equals the noise-form mean used by the reverse step") {
    Rng rng(2004);
    const NoiseSchedule s = cosine_schedule(100, 0.008);
    const Tensor h0 = random_unit_tensor(rng, {1, 1, 2, 2});
    Tensor eps = Tensor::zeros(h0.shape());
    for (double& v : eps.values()) v = rng.normal();
    for (int t : {2, 50, 100}) {
        const Tensor ht = diffusion::forward_diffuse(h0, t, eps, s);
        const diffusion::PosteriorParams p = diffusion::posterior_params(h0, ht, t, s);
        const double c = (1.0 - s.alpha[t]) / std::sqrt(1.0 - s.gamma[t]);
        for (std::size_t i = 0; i < h0.size(); ++i) {
            const double noise_form = (ht[i] - c * eps[i]) / std::sqrt(s.alpha[t]);
            CHECK(p.mu[i] == doctest::Approx(noise_form).epsilon(1e-12));
        }
        // variance stays inside (0, beta_t]
        CHECK(p.beta_tilde > 0.0);
        CHECK(p.beta_tilde <= s.beta[t]);
    }
}

TEST_CASE("reverse step is deterministic at t=1 and stochastic above") {
    Rng rng(2005);
    const NoiseSchedule s = cosine_schedule(100, 0.008);
    const Tensor h0 = random_unit_tensor(rng, {1, 1, 2, 2});
    const Tensor l = random_unit_tensor(rng, {1, 1, 2, 2});
    const auto net = oracle_net(h0);
    Tensor eps = Tensor::zeros(h0.shape());
    for (double& v : eps.values()) v = rng.normal();

    const Tensor h1 = diffusion::forward_diffuse(h0, 1, eps, s);
    Rng ra(1), rb(2);
    const Tensor outa = diffusion::reverse_step(l, h1, 1, s, net, ra);
    const Tensor outb = diffusion::reverse_step(l, h1, 1, s, net, rb);
    for (std::size_t i = 0; i < outa.size(); ++i) {
        CHECK(outa[i] == outb[i]);
        CHECK(outa[i] == doctest::Approx(h0[i]).epsilon(1e-12));
    }

    const Tensor h9 = diffusion::forward_diffuse(h0, 9, eps, s);
    Rng rc(1), rd(2);
    const Tensor outc = diffusion::reverse_step(l, h9, 9, s, net, rc);
    const Tensor outd = diffusion::reverse_step(l, h9, 9, s, net, rd);
    double diff = 0.0;
    for (std::size_t i = 0; i < outc.size(); ++i)
        diff = std::max(diff, std::abs(outc[i] - outd[i]));
    CHECK(diff > 0.0);
}

TEST_CASE("full reverse chain under the exact-noise oracle recovers the image") {
    Rng rng(2006);
    const NoiseSchedule s = cosine_schedule(50, 0.008);
    img::GrayImage target(8, 8);
    for (double& v : target.values) v = rng.uniform();
    img::GrayImage l(8, 8, 0.1);

    const Tensor h0 = img::to_tensor(target);
    Rng sampler(99);
    const img::GrayImage out = diffusion::sample(l, s, oracle_net(h0), sampler);
    double mae = 0.0;
    for (std::size_t i = 0; i < out.values.size(); ++i)
        mae += std::abs(out.values[i] - target.values[i]);
    mae /= double(out.values.size());
    CHECK(mae <= 1e-10);
}

TEST_CASE("sampling output is clamped to the unit interval") {
    const NoiseSchedule s = cosine_schedule(20, 0.008);
    img::GrayImage target(4, 4);
    for (std::size_t i = 0; i < 16; ++i) target.values[i] = i % 2 == 0 ? -3.0 : 4.0;
    const Tensor h0 = img::to_tensor(target);
    img::GrayImage l(4, 4, 0.0);
    Rng sampler(5);
    const img::GrayImage out = diffusion::sample(l, s, oracle_net(h0), sampler);
    for (double v : out.values) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    CHECK(out.values[0] == 0.0);
    CHECK(out.values[1] == 1.0);
}

TEST_CASE("training objective is zero for the oracle and positive otherwise") {
    Rng rng(2007);
    const NoiseSchedule s = cosine_schedule(50, 0.008);
    const Tensor h0 = random_unit_tensor(rng, {1, 1, 4, 4});
    const Tensor l = random_unit_tensor(rng, {1, 1, 4, 4});

    Rng draw(11);
    const Tensor perfect = diffusion::loss(nullptr, oracle_net(h0), l, h0, s, draw);
    CHECK(perfect.item() <= 1e-20);

    const auto zero_net = [](Tape*, const Tensor&, const Tensor& ht, double) {
        return Tensor::zeros(ht.shape());
    };
    Rng draw2(11);
    const Tensor imperfect = diffusion::loss(nullptr, zero_net, l, h0, s, draw2);
    CHECK(imperfect.item() > 0.0);

    // same rng state, same draw: the objective is reproducible
    Rng draw3(11), draw4(11);
    const double a = diffusion::loss(nullptr, zero_net, l, h0, s, draw3).item();
    const double b = diffusion::loss(nullptr, zero_net, l, h0, s, draw4).item();
    CHECK(a == b);
}
