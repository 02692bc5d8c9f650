#pragma once

#include <utility>
#include <vector>

#include "hoi/config.hpp"
#include "hoi/data.hpp"
#include "hoi/model.hpp"

namespace hoi {

struct MatchAssignment {
    std::vector<std::pair<int, int>> pairs;  // (gt_index, query_index), gt ascending
    double total_cost = 0.0;
};

// Composite matching cost between one prediction slot and one ground-truth
// triplet (plain doubles; matching is not differentiated):
//   lambda_reg  * (L1(human boxes) + L1(object boxes))          cxcywh
// + lambda_giou * ((1 - giou_h) + (1 - giou_o))                 xyxy
// + lambda_obj * (1 - softmax prob of the gt object class)
// + lambda_act * mean over true actions of (1 - sigmoid(logit))
double match_cost(const HOIPrediction& pred, const GroundTruthTriplet& gt, const RunConfig& cfg);

std::vector<std::vector<double>> build_cost_matrix(const std::vector<HOIPrediction>& preds,
                                                   const std::vector<GroundTruthTriplet>& gts,
                                                   const RunConfig& cfg);

// Minimum-total-cost injective assignment of every row (ground truth) to a
// column (query slot); ties broken by lexicographically smallest pair list.
// total_cost is the row-ordered sum of the chosen entries. Throws
// CapacityError when rows > columns and ParameterError on non-finite or
// ragged input.
MatchAssignment hungarian_match(const std::vector<std::vector<double>>& cost);

}  // namespace hoi
