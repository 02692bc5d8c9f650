#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "hoi/config.hpp"
#include "hoi/data.hpp"
#include "hoi/model.hpp"

namespace hoi {

// Unrounded per-step loss values, forwarded before formatting so invariants
// can be checked without going through the 9-digit log rounding.
struct StepMetrics {
    int64_t step = 0;
    double l_loc_h = 0.0;
    double l_loc_o = 0.0;
    double l_o = 0.0;
    double l_a = 0.0;
    double total = 0.0;
};

using StepCallback = std::function<void(const StepMetrics&)>;

struct TrainResult {
    ModelParams params;
    int64_t steps = 0;
    double final_total = 0.0;
};

// Initializes parameters from cfg.seed and runs cfg.epochs passes over the
// dataset in fixed scene order, one optimizer step per batch. Per-scene loss
// terms are averaged over the batch and recombined into the batch total, so
// the logged decomposition identity holds at every step. When metrics is
// non-null each step writes one tab-separated line: step, l_loc_h, l_loc_o,
// l_o, l_a, total at 9 significant digits. A non-finite batch total aborts
// with diagnostics. Deterministic: same dataset and config give bit-identical
// parameters.
TrainResult train_loop(const std::vector<SceneSample>& dataset, const RunConfig& cfg,
                       std::ostream* metrics = nullptr, const StepCallback& on_step = {});

}  // namespace hoi
