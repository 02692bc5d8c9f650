#include "hoi/matching.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>

#include "hoi/boxes.hpp"
#include "hoi/errors.hpp"

namespace hoi {

namespace {

double l1_distance(const std::array<double, 4>& a, const std::array<double, 4>& b) {
    double s = 0.0;
    for (int i = 0; i < 4; ++i) s += std::fabs(a[i] - b[i]);
    return s;
}

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softmax_prob(const std::vector<double>& logits, int index) {
    double m = logits[0];
    for (double v : logits) m = std::max(m, v);
    double denom = 0.0;
    for (double v : logits) denom += std::exp(v - m);
    return std::exp(logits[static_cast<size_t>(index)] - m) / denom;
}

}  // namespace

double match_cost(const HOIPrediction& pred, const GroundTruthTriplet& gt, const RunConfig& cfg) {
    if (pred.object_class_logits.size() != static_cast<size_t>(cfg.k_obj + 1))
        throw DimensionError("match_cost: expected " + std::to_string(cfg.k_obj + 1) +
                             " object logits, got " + std::to_string(pred.object_class_logits.size()));
    if (pred.interaction_logits.size() != static_cast<size_t>(cfg.k_act) ||
        gt.interaction_labels.size() != static_cast<size_t>(cfg.k_act))
        throw DimensionError("match_cost: interaction arity mismatch");
    if (gt.object_class < 0 || gt.object_class >= cfg.k_obj)
        throw ParameterError("match_cost: gt object class out of range");

    const double l1 = l1_distance(pred.human_box, gt.human_box) +
                      l1_distance(pred.object_box, gt.object_box);

    const double giou_h = giou(box_from_cxcywh(pred.human_box), box_from_cxcywh(gt.human_box));
    const double giou_o = giou(box_from_cxcywh(pred.object_box), box_from_cxcywh(gt.object_box));

    const double p_cls = softmax_prob(pred.object_class_logits, gt.object_class);

    double act = 0.0;
    int n_true = 0;
    for (int a = 0; a < cfg.k_act; ++a) {
        if (!gt.interaction_labels[static_cast<size_t>(a)]) continue;
        act += 1.0 - stable_sigmoid(pred.interaction_logits[static_cast<size_t>(a)]);
        ++n_true;
    }
    if (n_true == 0) throw ParameterError("match_cost: ground truth has no true action");
    act /= static_cast<double>(n_true);

    return cfg.lambda_reg * l1 + cfg.lambda_giou * ((1.0 - giou_h) + (1.0 - giou_o)) +
           cfg.lambda_obj * (1.0 - p_cls) + cfg.lambda_act * act;
}

std::vector<std::vector<double>> build_cost_matrix(const std::vector<HOIPrediction>& preds,
                                                   const std::vector<GroundTruthTriplet>& gts,
                                                   const RunConfig& cfg) {
    std::vector<std::vector<double>> cost(gts.size(), std::vector<double>(preds.size(), 0.0));
    for (size_t g = 0; g < gts.size(); ++g)
        for (size_t q = 0; q < preds.size(); ++q) cost[g][q] = match_cost(preds[q], gts[g], cfg);
    return cost;
}

namespace {

// Depth-first branch and bound over rows in order, columns tried in ascending
// index. The first assignment reaching a given total is the lexicographically
// smallest one with that total, so only strict improvements replace the
// incumbent, and nodes whose optimistic bound cannot beat it are cut.
struct AssignmentSearch {
    const std::vector<std::vector<double>>& cost;
    int n_rows, n_cols;
    std::vector<uint8_t> used;
    std::vector<int> current;
    std::vector<int> best;
    double best_total = std::numeric_limits<double>::infinity();

    explicit AssignmentSearch(const std::vector<std::vector<double>>& c)
        : cost(c),
          n_rows(static_cast<int>(c.size())),
          n_cols(c.empty() ? 0 : static_cast<int>(c[0].size())),
          used(static_cast<size_t>(n_cols), 0),
          current(static_cast<size_t>(n_rows), -1) {}

    double remaining_bound(int row) const {
        double lb = 0.0;
        for (int r = row; r < n_rows; ++r) {
            double m = std::numeric_limits<double>::infinity();
            for (int c = 0; c < n_cols; ++c)
                if (!used[static_cast<size_t>(c)]) m = std::min(m, cost[static_cast<size_t>(r)][static_cast<size_t>(c)]);
            lb += m;
        }
        return lb;
    }

    void dfs(int row, double partial) {
        if (row == n_rows) {
            if (partial < best_total) {
                best_total = partial;
                best = current;
            }
            return;
        }
        if (partial + remaining_bound(row) >= best_total) return;
        for (int c = 0; c < n_cols; ++c) {
            if (used[static_cast<size_t>(c)]) continue;
            used[static_cast<size_t>(c)] = 1;
            current[static_cast<size_t>(row)] = c;
            dfs(row + 1, partial + cost[static_cast<size_t>(row)][static_cast<size_t>(c)]);
            used[static_cast<size_t>(c)] = 0;
        }
        current[static_cast<size_t>(row)] = -1;
    }
};

}  // namespace

MatchAssignment hungarian_match(const std::vector<std::vector<double>>& cost) {
    MatchAssignment out;
    if (cost.empty()) return out;

    const size_t n_cols = cost[0].size();
    for (const auto& row : cost) {
        if (row.size() != n_cols) throw ParameterError("hungarian_match: ragged cost matrix");
        for (double v : row)
            if (!std::isfinite(v)) throw ParameterError("hungarian_match: non-finite cost entry");
    }
    if (cost.size() > n_cols)
        throw CapacityError("hungarian_match: " + std::to_string(cost.size()) +
                            " ground-truth rows exceed " + std::to_string(n_cols) +
                            " prediction slots");

    AssignmentSearch search(cost);
    search.dfs(0, 0.0);

    out.pairs.reserve(cost.size());
    double total = 0.0;
    for (int g = 0; g < search.n_rows; ++g) {
        const int q = search.best[static_cast<size_t>(g)];
        out.pairs.emplace_back(g, q);
        total += cost[static_cast<size_t>(g)][static_cast<size_t>(q)];
    }
    out.total_cost = total;
    return out;
}

}  // namespace hoi
