#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "hoi/errors.hpp"
#include "hoi/rng.hpp"
#include "hoi/train.hpp"

using namespace hoi;

namespace {

RunConfig train_cfg() {
    RunConfig cfg;
    cfg.d = 8;
    cfg.heads = 2;
    cfg.encoder_layers = 1;
    cfg.decoder_layers = 1;
    cfg.n_queries = 2;
    cfg.k_obj = 2;
    cfg.k_act = 2;
    cfg.channels = 4;
    cfg.grid_h = 4;
    cfg.grid_w = 4;
    cfg.epochs = 2;
    cfg.batch_size = 2;
    cfg.seed = 3;
    return cfg;
}

bool same_params(const ModelParams& a, const ModelParams& b) {
    const auto na = named_parameters(a);
    const auto nb = named_parameters(b);
    if (na.size() != nb.size()) return false;
    for (size_t i = 0; i < na.size(); ++i) {
        if (na[i].name != nb[i].name) return false;
        if (na[i].tensor.data() != nb[i].tensor.data()) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("zero epochs returns the untouched initialization") {
    RunConfig cfg = train_cfg();
    cfg.epochs = 0;
    const std::vector<SceneSample> data = generate_dataset(cfg.seed, 4, cfg);

    const TrainResult run = train_loop(data, cfg);
    CHECK(run.steps == 0);

    Rng rng(cfg.seed);
    const ModelParams reference = make_model_params(cfg, rng);
    CHECK(same_params(run.params, reference));
}

TEST_CASE("training is deterministic") {
    const RunConfig cfg = train_cfg();
    const std::vector<SceneSample> data = generate_dataset(17, 5, cfg);

    std::ostringstream log_a, log_b;
    const TrainResult a = train_loop(data, cfg, &log_a);
    const TrainResult b = train_loop(data, cfg, &log_b);
    CHECK(same_params(a.params, b.params));
    CHECK(log_a.str() == log_b.str());
    CHECK(a.final_total == b.final_total);
}

TEST_CASE("loss on a single repeated scene drops by more than ten percent over 200 steps") {
    RunConfig cfg = train_cfg();
    cfg.epochs = 200;
    cfg.batch_size = 1;
    const std::vector<SceneSample> data = generate_dataset(11, 1, cfg);

    std::vector<double> totals;
    const TrainResult run =
        train_loop(data, cfg, nullptr, [&](const StepMetrics& sm) { totals.push_back(sm.total); });
    REQUIRE(run.steps == 200);
    REQUIRE(totals.size() == 200);
    CHECK(totals.back() < 0.9 * totals.front());
}

TEST_CASE("every logged step satisfies the decomposition identity") {
    RunConfig cfg = train_cfg();
    cfg.epochs = 3;
    const std::vector<SceneSample> data = generate_dataset(23, 5, cfg);

    int steps_seen = 0;
    train_loop(data, cfg, nullptr, [&](const StepMetrics& sm) {
        ++steps_seen;
        const double recomposed =
            sm.l_loc_h + sm.l_loc_o + cfg.lambda_obj * sm.l_o + cfg.lambda_act * sm.l_a;
        CHECK(std::fabs(sm.total - recomposed) <= 1e-12);
        CHECK(sm.l_loc_h >= 0.0);
        CHECK(sm.l_loc_o >= 0.0);
        CHECK(sm.l_o >= 0.0);
        CHECK(sm.l_a >= 0.0);
    });
    // 5 scenes, batch 2 -> 3 steps per epoch
    CHECK(steps_seen == 9);
}

TEST_CASE("metrics lines are tab-separated with nine significant digits") {
    RunConfig cfg = train_cfg();
    cfg.epochs = 1;
    const std::vector<SceneSample> data = generate_dataset(29, 2, cfg);

    std::ostringstream log;
    std::vector<StepMetrics> seen;
    train_loop(data, cfg, &log, [&](const StepMetrics& sm) { seen.push_back(sm); });

    std::istringstream lines(log.str());
    std::string line;
    size_t i = 0;
    while (std::getline(lines, line)) {
        REQUIRE(i < seen.size());
        char want[256];
        std::snprintf(want, sizeof(want), "%lld\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g",
                      static_cast<long long>(seen[i].step), seen[i].l_loc_h, seen[i].l_loc_o,
                      seen[i].l_o, seen[i].l_a, seen[i].total);
        CHECK(line == want);
        ++i;
    }
    CHECK(i == seen.size());
    CHECK(i == 1);  // 2 scenes, batch 2 -> one step
}

TEST_CASE("divergence aborts with step diagnostics") {
    RunConfig cfg = train_cfg();
    cfg.epochs = 50;
    cfg.lr = 1e150;
    const std::vector<SceneSample> data = generate_dataset(31, 1, cfg);

    CHECK_THROWS_WITH_AS(train_loop(data, cfg), doctest::Contains("at step"), TrainingError);
}

TEST_CASE("empty dataset is rejected") {
    const RunConfig cfg = train_cfg();
    CHECK_THROWS_AS(train_loop({}, cfg), ParameterError);
}
