#pragma once

#include <vector>

#include "hoi/config.hpp"
#include "hoi/data.hpp"
#include "hoi/matching.hpp"
#include "hoi/model.hpp"
#include "hoi/tensor.hpp"

namespace hoi {

// All five terms are scalar graph nodes, so backward(total) reaches every
// parameter the composition touches. The identity
//   total == l_loc_h + l_loc_o + lambda_obj*l_o + lambda_act*l_a
// holds within 1e-12; the location terms already fold in lambda_reg and
// lambda_giou.
struct LossBreakdown {
    Tensor l_loc_h;
    Tensor l_loc_o;
    Tensor l_o;
    Tensor l_a;
    Tensor total;
    double lambda_reg = 0.0;
    double lambda_giou = 0.0;
    double lambda_obj = 0.0;
    double lambda_act = 0.0;
};

// Builds the training loss for one scene from the forward outputs, the
// ground-truth triplets, and a matching. Location terms are means over the
// matched pairs (box L1 on cxcywh, GIoU loss on xyxy). Object classification
// is cross-entropy over k_obj+1 classes averaged over all slots, with
// unmatched slots supervising the background column. Interaction
// classification is elementwise binary cross-entropy averaged over all
// slot-action cells, with unmatched slots targeting all-zero labels. Pairs
// are folded in ascending ground-truth order, so the result does not depend
// on the order of assignment.pairs.
LossBreakdown compute_losses(const ForwardResult& outputs,
                             const std::vector<GroundTruthTriplet>& gts,
                             const MatchAssignment& assignment, const RunConfig& cfg);

}  // namespace hoi
