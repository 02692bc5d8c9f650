#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "hoi/config.hpp"
#include "hoi/data.hpp"
#include "hoi/model.hpp"

namespace hoi {

// One detection unit: a human box, an object box, the object class, and one
// action, carrying the combined confidence. Boxes are xyxy.
struct ScoredTriplet {
    int scene_id = 0;
    std::array<double, 4> human_box{};
    std::array<double, 4> object_box{};
    int object_class = 0;
    int action = 0;
    double score = 0.0;
};

struct DetectionMetrics {
    double recall = 0.0;
    double precision = 0.0;
    double map = 0.0;
};

// per_category_ap lists (action, AP) for every action with at least one
// ground-truth instance, ascending; mean_ap averages exactly those entries.
// A dataset without any ground truth yields the sentinel report:
// evaluated_categories == 0, mean_ap == 0, empty category list.
struct EvalReport {
    std::vector<std::pair<int, double>> per_category_ap;
    double mean_ap = 0.0;
    int evaluated_categories = 0;
    DetectionMetrics humans;
    DetectionMetrics objects;
};

// Per slot: object class = argmax over the real classes, scored by the full
// softmax probability of that class times the sigmoid action probability;
// one triplet per (slot, action). Boxes converted to xyxy.
std::vector<ScoredTriplet> predictions_to_triplets(const std::vector<HOIPrediction>& preds,
                                                   int scene_id, const RunConfig& cfg);

// Greedy descending-score sweep (ties keep input order). A candidate is
// dropped when an already-kept triplet from the same scene shares its object
// class and action and overlaps it with BOTH IoUs above the threshold. Kept
// triplets come back in sweep order.
std::vector<ScoredTriplet> pairwise_nms(const std::vector<ScoredTriplet>& triplets,
                                        double threshold);

// Box-only quality, interactions ignored. Triplets sharing one slot repeat
// the same boxes, so predictions are first deduplicated exactly — humans by
// (scene, box), objects by (scene, box, class) — keeping each group's best
// score. Humans score as a single class; objects get per-class AP averaged
// over classes present in ground truth.
struct DetectionPair {
    DetectionMetrics humans;
    DetectionMetrics objects;
};
DetectionPair detection_metrics(const std::vector<ScoredTriplet>& preds,
                                const std::vector<SceneSample>& gts, double iou_threshold);

// Role mAP per action category: score-descending greedy claiming of unclaimed
// ground-truth triplets (same scene, object class match, both IoUs above the
// threshold; among qualifiers the largest min(iou_h, iou_o) wins, ties to the
// lowest index), then all-point precision-recall integration. Also fills the
// detection metrics for the same inputs.
EvalReport role_map(const std::vector<ScoredTriplet>& preds, const std::vector<SceneSample>& gts,
                    double iou_threshold);

// Forward + triplet extraction + pair-wise NMS over a whole dataset.
std::vector<ScoredTriplet> predict_dataset(const std::vector<SceneSample>& dataset,
                                           const ModelParams& params, const RunConfig& cfg);

enum class MaskTarget { humans, objects };

struct MaskProbeResult {
    double mean_ap = 0.0;
    int64_t masked_cells = 0;
    EvalReport report;
};

// Zeroes every feature channel of the cells inside each target box chosen by
// a Bernoulli(prob) draw (one draw per instance, scenes then triplets in
// order, stream seeded by `seed`). Ground truth is untouched.
std::vector<SceneSample> mask_dataset(const std::vector<SceneSample>& dataset, MaskTarget target,
                                      double prob, uint64_t seed, int64_t* masked_cells);

// mask_dataset followed by the standard evaluation with fixed parameters.
// prob 0 reproduces the unmasked metrics bit-exactly.
MaskProbeResult masking_probe(const std::vector<SceneSample>& dataset, const ModelParams& params,
                              const RunConfig& cfg, MaskTarget target, double prob, uint64_t seed);

}  // namespace hoi
