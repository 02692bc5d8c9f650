#include "hoi/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <utility>

#include "hoi/errors.hpp"
#include "hoi/losses.hpp"
#include "hoi/matching.hpp"
#include "hoi/optimizer.hpp"
#include "hoi/rng.hpp"

namespace hoi {

namespace {

std::string sig9(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

}  // namespace

TrainResult train_loop(const std::vector<SceneSample>& dataset, const RunConfig& cfg,
                       std::ostream* metrics, const StepCallback& on_step) {
    validate_config(cfg);
    if (dataset.empty()) throw ParameterError("train: dataset must not be empty");

    Rng rng(cfg.seed);
    TrainResult result;
    result.params = make_model_params(cfg, rng);

    AdamWConfig opt_cfg;
    opt_cfg.lr = cfg.lr;
    opt_cfg.weight_decay = cfg.weight_decay;
    AdamW opt(named_parameters(result.params), opt_cfg);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (size_t start = 0; start < dataset.size(); start += static_cast<size_t>(cfg.batch_size)) {
            const size_t stop = std::min(dataset.size(), start + static_cast<size_t>(cfg.batch_size));
            const double inv = 1.0 / static_cast<double>(stop - start);

            Tensor llh = Tensor::constant({1}, 0.0);
            Tensor llo = Tensor::constant({1}, 0.0);
            Tensor lo = Tensor::constant({1}, 0.0);
            Tensor la = Tensor::constant({1}, 0.0);
            for (size_t s = start; s < stop; ++s) {
                const SceneSample& scene = dataset[s];
                const ForwardResult out =
                    model_forward(scene, result.params, cfg.link_mode, cfg.sg_enabled);
                // A diverged model saturates a box head before any loss value
                // reaches infinity, so a degenerate predicted box is an abort,
                // not a propagated geometry error.
                try {
                    const MatchAssignment assignment =
                        hungarian_match(build_cost_matrix(out.predictions, scene.triplets, cfg));
                    const LossBreakdown lb = compute_losses(out, scene.triplets, assignment, cfg);
                    llh = add(llh, lb.l_loc_h);
                    llo = add(llo, lb.l_loc_o);
                    lo = add(lo, lb.l_o);
                    la = add(la, lb.l_a);
                } catch (const DegenerateBoxError& e) {
                    throw TrainingError("train: diverged at step " +
                                        std::to_string(opt.step_count() + 1) + " on scene " +
                                        std::to_string(scene.scene_id) + ": " + e.what());
                }
            }
            llh = scalar_mul(llh, inv);
            llo = scalar_mul(llo, inv);
            lo = scalar_mul(lo, inv);
            la = scalar_mul(la, inv);
            const Tensor total = add(add(llh, llo), add(scalar_mul(lo, cfg.lambda_obj),
                                                        scalar_mul(la, cfg.lambda_act)));

            StepMetrics sm;
            sm.step = opt.step_count() + 1;
            sm.l_loc_h = llh.item();
            sm.l_loc_o = llo.item();
            sm.l_o = lo.item();
            sm.l_a = la.item();
            sm.total = total.item();
            if (!std::isfinite(sm.total) || !std::isfinite(sm.l_loc_h) || !std::isfinite(sm.l_loc_o) ||
                !std::isfinite(sm.l_o) || !std::isfinite(sm.l_a))
                throw TrainingError("train: non-finite loss at step " + std::to_string(sm.step) +
                                    " (l_loc_h=" + sig9(sm.l_loc_h) + ", l_loc_o=" + sig9(sm.l_loc_o) +
                                    ", l_o=" + sig9(sm.l_o) + ", l_a=" + sig9(sm.l_a) +
                                    ", total=" + sig9(sm.total) + ")");

            const GradientMap grads = backward(total);
            opt.step(grads);

            if (metrics)
                (*metrics) << sm.step << '\t' << sig9(sm.l_loc_h) << '\t' << sig9(sm.l_loc_o) << '\t'
                           << sig9(sm.l_o) << '\t' << sig9(sm.l_a) << '\t' << sig9(sm.total) << '\n';
            if (on_step) on_step(sm);
            result.final_total = sm.total;
        }
    }
    result.steps = opt.step_count();
    return result;
}

}  // namespace hoi
