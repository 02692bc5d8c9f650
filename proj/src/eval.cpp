#include "hoi/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <tuple>

#include "hoi/boxes.hpp"
#include "hoi/errors.hpp"
#include "hoi/rng.hpp"

namespace hoi {

namespace {

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Box to_box(const std::array<double, 4>& xyxy) {
    return Box{xyxy[0], xyxy[1], xyxy[2], xyxy[3]};
}

// Indices of `preds`, highest score first; equal scores keep input order.
std::vector<size_t> score_order(const std::vector<ScoredTriplet>& preds) {
    for (const auto& p : preds)
        if (!std::isfinite(p.score)) throw ParameterError("eval: non-finite triplet score");
    std::vector<size_t> order(preds.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return preds[a].score > preds[b].score; });
    return order;
}

// tp flags in descending-score order. All-point interpolation: every true
// positive lifts recall by exactly 1/n_gt and contributes the best precision
// seen at its rank or later.
double average_precision(const std::vector<char>& tp, int n_gt) {
    if (n_gt <= 0) return 0.0;
    double best = 0.0;
    double acc = 0.0;
    int tp_total = 0;
    for (const char f : tp) tp_total += f ? 1 : 0;
    int tp_cum = tp_total;
    for (size_t i = tp.size(); i-- > 0;) {
        best = std::max(best, static_cast<double>(tp_cum) / static_cast<double>(i + 1));
        if (tp[i]) {
            acc += best;
            --tp_cum;
        }
    }
    return acc / static_cast<double>(n_gt);
}

struct GtBoxes {
    int scene_id = 0;
    Box human;
    Box object;
    int object_class = 0;
};

std::vector<GtBoxes> collect_gt(const std::vector<SceneSample>& gts) {
    std::vector<GtBoxes> out;
    for (const auto& scene : gts)
        for (const auto& t : scene.triplets)
            out.push_back({scene.scene_id, box_from_cxcywh(t.human_box),
                           box_from_cxcywh(t.object_box), t.object_class});
    return out;
}

}  // namespace

std::vector<ScoredTriplet> predictions_to_triplets(const std::vector<HOIPrediction>& preds,
                                                   int scene_id, const RunConfig& cfg) {
    std::vector<ScoredTriplet> out;
    for (const auto& p : preds) {
        if (p.object_class_logits.size() != static_cast<size_t>(cfg.k_obj + 1) ||
            p.interaction_logits.size() != static_cast<size_t>(cfg.k_act))
            throw DimensionError("predictions_to_triplets: logit arity mismatch");

        int cls = 0;
        for (int c = 1; c < cfg.k_obj; ++c)
            if (p.object_class_logits[static_cast<size_t>(c)] >
                p.object_class_logits[static_cast<size_t>(cls)])
                cls = c;

        double m = p.object_class_logits[0];
        for (double v : p.object_class_logits) m = std::max(m, v);
        double denom = 0.0;
        for (double v : p.object_class_logits) denom += std::exp(v - m);
        const double p_cls = std::exp(p.object_class_logits[static_cast<size_t>(cls)] - m) / denom;

        const Box hb = box_from_cxcywh(p.human_box);
        const Box ob = box_from_cxcywh(p.object_box);
        for (int a = 0; a < cfg.k_act; ++a) {
            ScoredTriplet t;
            t.scene_id = scene_id;
            t.human_box = {hb.x1, hb.y1, hb.x2, hb.y2};
            t.object_box = {ob.x1, ob.y1, ob.x2, ob.y2};
            t.object_class = cls;
            t.action = a;
            t.score = p_cls * stable_sigmoid(p.interaction_logits[static_cast<size_t>(a)]);
            out.push_back(t);
        }
    }
    return out;
}

std::vector<ScoredTriplet> pairwise_nms(const std::vector<ScoredTriplet>& triplets,
                                        double threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0))
        throw ParameterError("pairwise_nms: threshold must lie in (0, 1]");
    std::vector<ScoredTriplet> kept;
    for (const size_t i : score_order(triplets)) {
        const ScoredTriplet& cand = triplets[i];
        bool suppressed = false;
        for (const ScoredTriplet& k : kept) {
            if (k.scene_id != cand.scene_id || k.object_class != cand.object_class ||
                k.action != cand.action)
                continue;
            if (iou(to_box(k.human_box), to_box(cand.human_box)) > threshold &&
                iou(to_box(k.object_box), to_box(cand.object_box)) > threshold) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) kept.push_back(cand);
    }
    return kept;
}

namespace {

// Single-box greedy AP machinery shared by the human and object metrics.
struct Detection {
    int scene_id = 0;
    Box box;
    int cls = 0;  // -1 for class-blind (humans)
    double score = 0.0;
};

struct GreedyResult {
    std::vector<char> tp;  // descending-score order
    int claimed = 0;
};

GreedyResult greedy_claim(const std::vector<Detection>& dets, const std::vector<Detection>& gts,
                          double thr) {
    std::vector<size_t> order(dets.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return dets[a].score > dets[b].score; });
    GreedyResult res;
    std::vector<char> claimed(gts.size(), 0);
    for (const size_t i : order) {
        const Detection& d = dets[i];
        int best = -1;
        double best_iou = -1.0;
        for (size_t j = 0; j < gts.size(); ++j) {
            if (claimed[j] || gts[j].scene_id != d.scene_id || gts[j].cls != d.cls) continue;
            const double v = iou(d.box, gts[j].box);
            if (v > thr && v > best_iou) {
                best_iou = v;
                best = static_cast<int>(j);
            }
        }
        if (best >= 0) {
            claimed[static_cast<size_t>(best)] = 1;
            ++res.claimed;
            res.tp.push_back(1);
        } else {
            res.tp.push_back(0);
        }
    }
    return res;
}

DetectionMetrics single_set_metrics(const std::vector<Detection>& dets,
                                    const std::vector<Detection>& gts, double thr,
                                    bool per_class_ap) {
    DetectionMetrics dm;
    const GreedyResult all = greedy_claim(dets, gts, thr);
    dm.recall = gts.empty() ? 1.0
                            : static_cast<double>(all.claimed) / static_cast<double>(gts.size());
    dm.precision = dets.empty()
                       ? 1.0
                       : static_cast<double>(all.claimed) / static_cast<double>(dets.size());
    if (!per_class_ap) {
        std::vector<char> tp = all.tp;
        dm.map = average_precision(tp, static_cast<int>(gts.size()));
        return dm;
    }
    std::vector<int> classes;
    for (const auto& g : gts)
        if (std::find(classes.begin(), classes.end(), g.cls) == classes.end())
            classes.push_back(g.cls);
    std::sort(classes.begin(), classes.end());
    if (classes.empty()) {
        dm.map = 0.0;
        return dm;
    }
    double sum_ap = 0.0;
    for (const int c : classes) {
        std::vector<Detection> dc, gc;
        for (const auto& d : dets)
            if (d.cls == c) dc.push_back(d);
        for (const auto& g : gts)
            if (g.cls == c) gc.push_back(g);
        const GreedyResult r = greedy_claim(dc, gc, thr);
        sum_ap += average_precision(r.tp, static_cast<int>(gc.size()));
    }
    dm.map = sum_ap / static_cast<double>(classes.size());
    return dm;
}

}  // namespace

DetectionPair detection_metrics(const std::vector<ScoredTriplet>& preds,
                                const std::vector<SceneSample>& gts, double iou_threshold) {
    if (!(iou_threshold > 0.0 && iou_threshold < 1.0))
        throw ParameterError("detection_metrics: iou threshold must lie in (0, 1)");

    // Exact dedupe in first-appearance order, keeping each group's best score.
    using HumanKey = std::tuple<int, double, double, double, double>;
    using ObjectKey = std::tuple<int, double, double, double, double, int>;
    std::map<HumanKey, size_t> hseen;
    std::map<ObjectKey, size_t> oseen;
    std::vector<Detection> humans, objects;
    for (const auto& p : preds) {
        if (!std::isfinite(p.score)) throw ParameterError("eval: non-finite triplet score");
        const HumanKey hk{p.scene_id, p.human_box[0], p.human_box[1], p.human_box[2],
                          p.human_box[3]};
        auto hit = hseen.find(hk);
        if (hit == hseen.end()) {
            hseen.emplace(hk, humans.size());
            humans.push_back({p.scene_id, to_box(p.human_box), -1, p.score});
        } else {
            humans[hit->second].score = std::max(humans[hit->second].score, p.score);
        }
        const ObjectKey ok{p.scene_id,      p.object_box[0], p.object_box[1],
                           p.object_box[2], p.object_box[3], p.object_class};
        auto oit = oseen.find(ok);
        if (oit == oseen.end()) {
            oseen.emplace(ok, objects.size());
            objects.push_back({p.scene_id, to_box(p.object_box), p.object_class, p.score});
        } else {
            objects[oit->second].score = std::max(objects[oit->second].score, p.score);
        }
    }

    std::vector<Detection> gt_h, gt_o;
    for (const auto& g : collect_gt(gts)) {
        gt_h.push_back({g.scene_id, g.human, -1, 0.0});
        gt_o.push_back({g.scene_id, g.object, g.object_class, 0.0});
    }

    DetectionPair pair;
    pair.humans = single_set_metrics(humans, gt_h, iou_threshold, false);
    pair.objects = single_set_metrics(objects, gt_o, iou_threshold, true);
    return pair;
}

EvalReport role_map(const std::vector<ScoredTriplet>& preds, const std::vector<SceneSample>& gts,
                    double iou_threshold) {
    if (!(iou_threshold > 0.0 && iou_threshold < 1.0))
        throw ParameterError("role_map: iou threshold must lie in (0, 1)");

    const std::vector<GtBoxes> instances = collect_gt(gts);
    std::vector<std::vector<size_t>> by_action;  // action -> instance indices
    {
        size_t idx = 0;
        for (const auto& scene : gts) {
            for (const auto& t : scene.triplets) {
                if (by_action.size() < t.interaction_labels.size())
                    by_action.resize(t.interaction_labels.size());
                for (size_t a = 0; a < t.interaction_labels.size(); ++a)
                    if (t.interaction_labels[a]) by_action[a].push_back(idx);
                ++idx;
            }
        }
    }

    const std::vector<size_t> order = score_order(preds);

    EvalReport report;
    for (size_t a = 0; a < by_action.size(); ++a) {
        if (by_action[a].empty()) continue;
        const std::vector<size_t>& inst = by_action[a];
        std::vector<char> claimed(inst.size(), 0);
        std::vector<char> tp;
        for (const size_t i : order) {
            const ScoredTriplet& p = preds[i];
            if (p.action != static_cast<int>(a)) continue;
            int best = -1;
            double best_key = -1.0;
            for (size_t j = 0; j < inst.size(); ++j) {
                if (claimed[j]) continue;
                const GtBoxes& g = instances[inst[j]];
                if (g.scene_id != p.scene_id || g.object_class != p.object_class) continue;
                const double ih = iou(to_box(p.human_box), g.human);
                if (ih <= iou_threshold) continue;
                const double io = iou(to_box(p.object_box), g.object);
                if (io <= iou_threshold) continue;
                const double key = std::min(ih, io);
                if (key > best_key) {
                    best_key = key;
                    best = static_cast<int>(j);
                }
            }
            if (best >= 0) {
                claimed[static_cast<size_t>(best)] = 1;
                tp.push_back(1);
            } else {
                tp.push_back(0);
            }
        }
        const double ap = average_precision(tp, static_cast<int>(inst.size()));
        report.per_category_ap.emplace_back(static_cast<int>(a), ap);
    }

    report.evaluated_categories = static_cast<int>(report.per_category_ap.size());
    if (report.evaluated_categories > 0) {
        double s = 0.0;
        for (const auto& [a, ap] : report.per_category_ap) s += ap;
        report.mean_ap = s / static_cast<double>(report.evaluated_categories);
    }

    const DetectionPair det = detection_metrics(preds, gts, iou_threshold);
    report.humans = det.humans;
    report.objects = det.objects;
    return report;
}

std::vector<ScoredTriplet> predict_dataset(const std::vector<SceneSample>& dataset,
                                           const ModelParams& params, const RunConfig& cfg) {
    std::vector<ScoredTriplet> all;
    for (const auto& scene : dataset) {
        const ForwardResult out = model_forward(scene, params, cfg.link_mode, cfg.sg_enabled);
        const std::vector<ScoredTriplet> t =
            predictions_to_triplets(out.predictions, scene.scene_id, cfg);
        all.insert(all.end(), t.begin(), t.end());
    }
    return pairwise_nms(all, cfg.nms_threshold);
}

std::vector<SceneSample> mask_dataset(const std::vector<SceneSample>& dataset, MaskTarget target,
                                      double prob, uint64_t seed, int64_t* masked_cells) {
    if (!(prob >= 0.0 && prob <= 1.0))
        throw ParameterError("mask_dataset: prob must lie in [0, 1]");

    Rng rng(seed);
    if (masked_cells) *masked_cells = 0;
    std::vector<SceneSample> masked;
    masked.reserve(dataset.size());
    for (const auto& scene : dataset) {
        if (scene.feature_grid.rank() != 3)
            throw DimensionError("mask_dataset: feature grid must be [C, H, W]");
        const Shape& s = scene.feature_grid.shape();
        const int C = s[0], H = s[1], W = s[2];
        std::vector<double> data = scene.feature_grid.data();
        for (const auto& t : scene.triplets) {
            if (!rng.bernoulli(prob)) continue;
            const std::array<double, 4>& box =
                target == MaskTarget::humans ? t.human_box : t.object_box;
            const auto cells = cells_inside_box(box, H, W);
            for (const auto& [r, c] : cells)
                for (int ch = 0; ch < C; ++ch)
                    data[static_cast<size_t>((ch * H + r) * W + c)] = 0.0;
            if (masked_cells) *masked_cells += static_cast<int64_t>(cells.size());
        }
        SceneSample m;
        m.scene_id = scene.scene_id;
        m.feature_grid = Tensor::from_data(s, std::move(data), false);
        m.triplets = scene.triplets;
        masked.push_back(std::move(m));
    }
    return masked;
}

MaskProbeResult masking_probe(const std::vector<SceneSample>& dataset, const ModelParams& params,
                              const RunConfig& cfg, MaskTarget target, double prob,
                              uint64_t seed) {
    MaskProbeResult res;
    const std::vector<SceneSample> masked =
        mask_dataset(dataset, target, prob, seed, &res.masked_cells);
    res.report = role_map(predict_dataset(masked, params, cfg), masked, cfg.iou_threshold);
    res.mean_ap = res.report.mean_ap;
    return res;
}

}  // namespace hoi
