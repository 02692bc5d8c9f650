#include "hoi/losses.hpp"

#include <algorithm>
#include <string>
#include <utility>

#include "hoi/boxes.hpp"
#include "hoi/errors.hpp"

namespace hoi {

namespace {

Tensor elem_max(const Tensor& a, const Tensor& b) { return add(a, relu(sub(b, a))); }
Tensor elem_min(const Tensor& a, const Tensor& b) { return sub(a, relu(sub(a, b))); }

struct BoxGraph {
    Tensor x1, y1, x2, y2;
};

// cxcywh row -> xyxy corner nodes, same arithmetic as box_from_cxcywh.
BoxGraph corners_from_row(const Tensor& boxes, int row) {
    const Tensor cx = slice(boxes, row, 1, 0, 1);
    const Tensor cy = slice(boxes, row, 1, 1, 1);
    const Tensor half_w = scalar_mul(slice(boxes, row, 1, 2, 1), 0.5);
    const Tensor half_h = scalar_mul(slice(boxes, row, 1, 3, 1), 0.5);
    return {sub(cx, half_w), sub(cy, half_h), add(cx, half_w), add(cy, half_h)};
}

Tensor box_const(double v) { return Tensor::constant({1, 1}, v); }

// Mirrors the scalar giou oracle; the intersection clamp happens on the side
// lengths, which is the same value the early-out computes.
Tensor giou_graph(const BoxGraph& p, const Box& g) {
    const Tensor iw = relu(sub(elem_min(p.x2, box_const(g.x2)), elem_max(p.x1, box_const(g.x1))));
    const Tensor ih = relu(sub(elem_min(p.y2, box_const(g.y2)), elem_max(p.y1, box_const(g.y1))));
    const Tensor inter = mul(iw, ih);

    const Tensor area_p = mul(sub(p.x2, p.x1), sub(p.y2, p.y1));
    const Tensor area_g = box_const(box_area(g));
    const Tensor uni = sub(add(area_p, area_g), inter);

    const Tensor hull_w = sub(elem_max(p.x2, box_const(g.x2)), elem_min(p.x1, box_const(g.x1)));
    const Tensor hull_h = sub(elem_max(p.y2, box_const(g.y2)), elem_min(p.y1, box_const(g.y1)));
    const Tensor hull = mul(hull_w, hull_h);

    const Tensor penalty = relu(sub(hull, uni));
    return sub(div(inter, uni), div(penalty, hull));
}

Tensor gt_box_row(const std::array<double, 4>& b) {
    return Tensor::from_data({1, 4}, {b[0], b[1], b[2], b[3]}, false);
}

}  // namespace

LossBreakdown compute_losses(const ForwardResult& outputs,
                             const std::vector<GroundTruthTriplet>& gts,
                             const MatchAssignment& assignment, const RunConfig& cfg) {
    if (outputs.human_boxes.rank() != 2 || outputs.human_boxes.dim(1) != 4 ||
        outputs.object_boxes.shape() != outputs.human_boxes.shape())
        throw DimensionError("compute_losses: box outputs must both be [N x 4]");
    const int n = outputs.human_boxes.dim(0);
    const int k_bg = cfg.k_obj;  // background column index

    if (outputs.object_logits.rank() != 2 || outputs.object_logits.dim(0) != n ||
        outputs.object_logits.dim(1) != cfg.k_obj + 1)
        throw DimensionError("compute_losses: object logits must be [N x k_obj+1]");
    if (outputs.action_logits.rank() != 2 || outputs.action_logits.dim(0) != n ||
        outputs.action_logits.dim(1) != cfg.k_act)
        throw DimensionError("compute_losses: action logits must be [N x k_act]");

    if (assignment.pairs.size() != gts.size())
        throw ParameterError("compute_losses: assignment must cover every ground truth exactly once");
    std::vector<std::pair<int, int>> pairs = assignment.pairs;
    std::sort(pairs.begin(), pairs.end());
    std::vector<uint8_t> q_used(static_cast<size_t>(n), 0);
    for (size_t i = 0; i < pairs.size(); ++i) {
        const auto [g, q] = pairs[i];
        if (g != static_cast<int>(i))
            throw ParameterError("compute_losses: ground-truth indices must form a permutation of 0.." +
                                 std::to_string(gts.size() ? gts.size() - 1 : 0));
        if (q < 0 || q >= n) throw ParameterError("compute_losses: query index out of range");
        if (q_used[static_cast<size_t>(q)]) throw ParameterError("compute_losses: query matched twice");
        q_used[static_cast<size_t>(q)] = 1;
        if (gts[i].interaction_labels.size() != static_cast<size_t>(cfg.k_act))
            throw DimensionError("compute_losses: ground-truth action arity mismatch");
        if (gts[i].object_class < 0 || gts[i].object_class >= cfg.k_obj)
            throw ParameterError("compute_losses: ground-truth class out of range");
    }

    Tensor l1_h = Tensor::constant({1}, 0.0);
    Tensor l1_o = Tensor::constant({1}, 0.0);
    Tensor giou_h = Tensor::constant({1}, 0.0);
    Tensor giou_o = Tensor::constant({1}, 0.0);
    for (const auto& [g, q] : pairs) {
        const GroundTruthTriplet& gt = gts[static_cast<size_t>(g)];
        const Tensor pred_h = slice(outputs.human_boxes, q, 1, 0, 4);
        const Tensor pred_o = slice(outputs.object_boxes, q, 1, 0, 4);
        l1_h = add(l1_h, sum(abs(sub(pred_h, gt_box_row(gt.human_box)))));
        l1_o = add(l1_o, sum(abs(sub(pred_o, gt_box_row(gt.object_box)))));

        const Tensor one = Tensor::constant({1, 1}, 1.0);
        giou_h = add(giou_h, sum(sub(one, giou_graph(corners_from_row(outputs.human_boxes, q),
                                                     box_from_cxcywh(gt.human_box)))));
        giou_o = add(giou_o, sum(sub(one, giou_graph(corners_from_row(outputs.object_boxes, q),
                                                     box_from_cxcywh(gt.object_box)))));
    }
    if (!pairs.empty()) {
        const double inv = 1.0 / static_cast<double>(pairs.size());
        l1_h = scalar_mul(l1_h, inv);
        l1_o = scalar_mul(l1_o, inv);
        giou_h = scalar_mul(giou_h, inv);
        giou_o = scalar_mul(giou_o, inv);
    }

    // Cross-entropy picks each slot's target logit through a one-hot mask;
    // unmatched slots target the background column.
    std::vector<double> onehot(static_cast<size_t>(n) * static_cast<size_t>(cfg.k_obj + 1), 0.0);
    for (int q = 0; q < n; ++q) onehot[static_cast<size_t>(q * (cfg.k_obj + 1) + k_bg)] = 1.0;
    std::vector<double> act_targets(static_cast<size_t>(n) * static_cast<size_t>(cfg.k_act), 0.0);
    for (const auto& [g, q] : pairs) {
        const GroundTruthTriplet& gt = gts[static_cast<size_t>(g)];
        onehot[static_cast<size_t>(q * (cfg.k_obj + 1) + k_bg)] = 0.0;
        onehot[static_cast<size_t>(q * (cfg.k_obj + 1) + gt.object_class)] = 1.0;
        for (int a = 0; a < cfg.k_act; ++a)
            act_targets[static_cast<size_t>(q * cfg.k_act + a)] =
                gt.interaction_labels[static_cast<size_t>(a)] ? 1.0 : 0.0;
    }
    const Tensor class_mask = Tensor::from_data({n, cfg.k_obj + 1}, std::move(onehot), false);
    const Tensor lse = logsumexp_lastdim(outputs.object_logits);
    const Tensor picked = sum(mul(outputs.object_logits, class_mask));
    Tensor l_o = scalar_mul(sub(sum(lse), picked), 1.0 / static_cast<double>(n));

    // Elementwise stable binary cross-entropy: softplus(x) - x*y.
    const Tensor y = Tensor::from_data({n, cfg.k_act}, std::move(act_targets), false);
    Tensor l_a = mean(sub(softplus(outputs.action_logits), mul(outputs.action_logits, y)));

    LossBreakdown out;
    out.lambda_reg = cfg.lambda_reg;
    out.lambda_giou = cfg.lambda_giou;
    out.lambda_obj = cfg.lambda_obj;
    out.lambda_act = cfg.lambda_act;
    out.l_loc_h = add(scalar_mul(l1_h, cfg.lambda_reg), scalar_mul(giou_h, cfg.lambda_giou));
    out.l_loc_o = add(scalar_mul(l1_o, cfg.lambda_reg), scalar_mul(giou_o, cfg.lambda_giou));
    out.l_o = l_o;
    out.l_a = l_a;
    out.total = add(add(out.l_loc_h, out.l_loc_o),
                    add(scalar_mul(l_o, cfg.lambda_obj), scalar_mul(l_a, cfg.lambda_act)));
    return out;
}

}  // namespace hoi
