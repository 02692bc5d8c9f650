#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN

#include <cmath>
#include <vector>

#include "doctest.h"
#include "hoi/errors.hpp"
#include "hoi/optimizer.hpp"
#include "hoi/rng.hpp"

using namespace hoi;

namespace {

Tensor leaf(const std::vector<double>& v) {
    return Tensor::from_data({static_cast<int>(v.size())}, v, true);
}

GradientMap grads_of(const Tensor& t, const std::vector<double>& g) {
    GradientMap gm;
    gm.entries[t.id()] = g;
    return gm;
}

}  // namespace

TEST_CASE("zero gradient applies pure decoupled decay") {
    Tensor p = leaf({1.0});
    AdamWConfig cfg;
    cfg.lr = 0.1;
    cfg.weight_decay = 0.1;
    AdamW opt({{"p", p}}, cfg);
    opt.step(GradientMap{});
    CHECK(p.data()[0] == 0.99);
}

TEST_CASE("constant gradient converges to a step of lr times sign") {
    Tensor p = leaf({2.0, -3.0});
    AdamWConfig cfg;
    cfg.lr = 0.01;
    cfg.weight_decay = 0.0;
    AdamW opt({{"p", p}}, cfg);

    double prev0 = p.data()[0], prev1 = p.data()[1];
    double step0 = 0.0, step1 = 0.0;
    for (int i = 0; i < 500; ++i) {
        opt.step(grads_of(p, {0.5, -0.25}));
        step0 = prev0 - p.data()[0];
        step1 = prev1 - p.data()[1];
        prev0 = p.data()[0];
        prev1 = p.data()[1];
    }
    CHECK(step0 == doctest::Approx(cfg.lr).epsilon(1e-6));   // sign(+0.5) = +1
    CHECK(step1 == doctest::Approx(-cfg.lr).epsilon(1e-6));  // sign(-0.25) = -1
}

TEST_CASE("step counter increments by one per call") {
    Tensor p = leaf({0.0});
    AdamW opt({{"p", p}}, AdamWConfig{});
    CHECK(opt.step_count() == 0);
    for (int i = 1; i <= 5; ++i) {
        opt.step(GradientMap{});
        CHECK(opt.step_count() == i);
    }
}

TEST_CASE("trajectory matches a straight-line recomputation") {
    Tensor p = leaf({0.4, -1.2, 2.5});
    AdamWConfig cfg;
    cfg.lr = 0.05;
    cfg.weight_decay = 0.02;
    AdamW opt({{"p", p}}, cfg);

    std::vector<double> w = p.data();
    std::vector<double> m(w.size(), 0.0), v(w.size(), 0.0);

    Rng rng(99);
    for (int t = 1; t <= 10; ++t) {
        std::vector<double> g;
        for (size_t j = 0; j < w.size(); ++j) g.push_back(rng.uniform(-1.0, 1.0));
        opt.step(grads_of(p, g));

        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
        for (size_t j = 0; j < w.size(); ++j) {
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
            const double m_hat = m[j] / bc1;
            const double v_hat = v[j] / bc2;
            w[j] -= cfg.lr * (m_hat / (std::sqrt(v_hat) + cfg.eps) + cfg.weight_decay * w[j]);
        }
        for (size_t j = 0; j < w.size(); ++j) CHECK(p.data()[j] == w[j]);
    }
}

TEST_CASE("same gradients give bit-identical trajectories") {
    Tensor a = leaf({1.0, 2.0});
    Tensor b = leaf({1.0, 2.0});
    AdamW opt_a({{"p", a}}, AdamWConfig{});
    AdamW opt_b({{"p", b}}, AdamWConfig{});
    for (int t = 0; t < 5; ++t) {
        opt_a.step(grads_of(a, {0.3, -0.7}));
        opt_b.step(grads_of(b, {0.3, -0.7}));
        CHECK(a.data() == b.data());
    }
}

TEST_CASE("parameters without gradient entries only decay") {
    Tensor moving = leaf({1.0});
    Tensor parked = leaf({1.0});
    AdamWConfig cfg;
    cfg.lr = 0.1;
    cfg.weight_decay = 0.0;
    AdamW opt({{"moving", moving}, {"parked", parked}}, cfg);
    opt.step(grads_of(moving, {0.5}));
    CHECK(moving.data()[0] < 1.0);
    CHECK(parked.data()[0] == 1.0);
}

TEST_CASE("construction and step validation") {
    SUBCASE("gradient length mismatch") {
        Tensor p = leaf({1.0, 2.0});
        AdamW opt({{"p", p}}, AdamWConfig{});
        GradientMap gm;
        gm.entries[p.id()] = {1.0};
        CHECK_THROWS_AS(opt.step(gm), DimensionError);
    }
    SUBCASE("non-trainable leaf") {
        Tensor frozen = Tensor::from_data({1}, {1.0}, false);
        CHECK_THROWS_AS(AdamW({{"frozen", frozen}}, AdamWConfig{}), ParameterError);
    }
    SUBCASE("derived node") {
        Tensor p = leaf({1.0});
        Tensor derived = scalar_mul(p, 2.0);
        CHECK_THROWS_AS(AdamW({{"derived", derived}}, AdamWConfig{}), ParameterError);
    }
    SUBCASE("bad hyperparameters") {
        Tensor p = leaf({1.0});
        AdamWConfig bad;
        bad.lr = 0.0;
        CHECK_THROWS_AS(AdamW({{"p", p}}, bad), ParameterError);
        bad = AdamWConfig{};
        bad.beta1 = 1.0;
        CHECK_THROWS_AS(AdamW({{"p", p}}, bad), ParameterError);
        bad = AdamWConfig{};
        bad.weight_decay = -0.1;
        CHECK_THROWS_AS(AdamW({{"p", p}}, bad), ParameterError);
    }
}
