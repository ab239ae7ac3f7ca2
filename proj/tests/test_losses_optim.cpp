#include <catch2/catch_amalgamated.hpp>

#include "posekit/losses.hpp"
#include "posekit/optim.hpp"
#include "posekit/rng.hpp"

using namespace posekit;

TEST_CASE("cross entropy uniform and saturated cases") {
    DTensor logits({2});
    REQUIRE(cross_entropy(logits, 0) == Catch::Approx(std::log(2.0)));

    DTensor big({2});
    big.at(0) = 1000.0;
    REQUIRE(cross_entropy(big, 0) == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(std::isfinite(cross_entropy(big, 1)));

    REQUIRE_THROWS_AS(cross_entropy(logits, 2), ConfigError);
    REQUIRE_THROWS_AS(cross_entropy(logits, -1), ConfigError);
}

TEST_CASE("cross entropy gradient equals softmax minus onehot") {
    Rng rng(17);
    DTensor logits({5});
    for (auto& v : logits.data) v = rng.normal();
    DTensor grad({5});
    cross_entropy(logits, 3, &grad);
    const DTensor p = softmax(logits);
    for (int i = 0; i < 5; ++i)
        REQUIRE(grad.at(i) == Catch::Approx(p.at(i) - (i == 3 ? 1.0 : 0.0)).margin(1e-12));
}

TEST_CASE("bce values and clamping") {
    REQUIRE(bce(0.5, 1) == Catch::Approx(std::log(2.0)));
    REQUIRE(bce(0.5, 0) == Catch::Approx(std::log(2.0)));
    // clamped, never infinite
    REQUIRE(std::isfinite(bce(0.0, 1)));
    REQUIRE(std::isfinite(bce(1.0, 0)));

    // batch [(0.9,1),(0.1,0)] -> -(ln 0.9 + ln 0.9)/2
    const double expected = -0.5 * (std::log(0.9) + std::log(0.9));
    REQUIRE(bce_batch({{0.9, 1}, {0.1, 0}}) == Catch::Approx(expected).epsilon(1e-12));
    REQUIRE(bce_batch({{0.9, 1}, {0.1, 0}}) == Catch::Approx(0.1054).margin(5e-5));
}

TEST_CASE("sgd leaves params alone on zero gradient") {
    TrainConfig cfg;
    cfg.learning_rate = 0.1;
    Sgd<float> opt(cfg);
    Tensor p({4}, 2.0f), g({4});
    std::vector<ParamRef<float>> refs{{"p", &p, &g}};
    opt.step(refs, 0);
    for (float v : p.data) REQUIRE(v == 2.0f);
}

TEST_CASE("step decay: epoch 0 vs epoch 3") {
    TrainConfig cfg;
    cfg.learning_rate = 0.001;
    cfg.lr_step_epochs = 3;
    cfg.lr_decay_factor = 0.1;
    REQUIRE(effective_lr(cfg, 0) == Catch::Approx(0.001));
    REQUIRE(effective_lr(cfg, 2) == Catch::Approx(0.001));
    REQUIRE(effective_lr(cfg, 3) == Catch::Approx(0.0001));
    REQUIRE(effective_lr(cfg, 6) == Catch::Approx(0.00001));
}

TEST_CASE("effective lr is non-increasing in epoch") {
    Rng rng(23);
    for (int trial = 0; trial < 50; ++trial) {
        TrainConfig cfg;
        cfg.learning_rate = rng.uniform(1e-5, 1.0);
        cfg.lr_step_epochs = 1 + static_cast<int>(rng.uniform_int(5));
        cfg.lr_decay_factor = rng.uniform(0.05, 1.0);
        cfg.validate();
        double prev = std::numeric_limits<double>::infinity();
        for (int e = 0; e < 20; ++e) {
            const double lr = effective_lr(cfg, e);
            REQUIRE(lr <= prev);
            prev = lr;
        }
    }
}

TEST_CASE("plain sgd scalar step") {
    TrainConfig cfg;
    cfg.learning_rate = 0.1;
    Tensor p({1}, 1.0f), g({1}, 1.0f);
    std::vector<ParamRef<float>> refs{{"p", &p, &g}};
    sgd_step(refs, cfg, 0);
    REQUIRE(p.at(0) == Catch::Approx(0.9));
}

TEST_CASE("momentum accumulates velocity") {
    TrainConfig cfg;
    cfg.learning_rate = 1.0;
    cfg.momentum = 0.9;
    Sgd<double> opt(cfg);
    TensorT<double> p({1}, 0.0), g({1}, 1.0);
    std::vector<ParamRef<double>> refs{{"p", &p, &g}};
    opt.step(refs, 0); // v=1, p=-1
    REQUIRE(p.at(0) == Catch::Approx(-1.0));
    opt.step(refs, 0); // v=1.9, p=-2.9
    REQUIRE(p.at(0) == Catch::Approx(-2.9));
}

TEST_CASE("train config validation") {
    TrainConfig cfg;
    cfg.validate();
    cfg.learning_rate = 0;
    REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    cfg.dropout_p = 1.0;
    REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    cfg.batch_size = 0;
    REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    cfg.lr_decay_factor = 1.5;
    REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
}
