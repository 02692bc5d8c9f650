#include "hoi/model.hpp"

#include <cmath>
#include <string>

#include "hoi/errors.hpp"

namespace hoi {

namespace {

Tensor make_query(int n, int d, Rng& rng) {
    std::vector<double> data(static_cast<std::size_t>(n) * d);
    for (double& v : data) v = rng.normal(0.0, 0.02);
    return Tensor::from_data({n, d}, std::move(data), true);
}

BoxHeadParams make_box_head(int d, Rng& rng) {
    BoxHeadParams h;
    h.w1 = make_linear_weight(d, d, rng);
    h.b1 = make_linear_bias(d, d, rng);
    h.w2 = make_linear_weight(d, d, rng);
    h.b2 = make_linear_bias(d, d, rng);
    h.w3 = make_linear_weight(d, 4, rng);
    h.b3 = make_linear_bias(d, 4, rng);
    return h;
}

void collect_box_head(const BoxHeadParams& h, const std::string& prefix,
                      std::vector<NamedParam>& out) {
    out.push_back({prefix + ".w1", h.w1});
    out.push_back({prefix + ".b1", h.b1});
    out.push_back({prefix + ".w2", h.w2});
    out.push_back({prefix + ".b2", h.b2});
    out.push_back({prefix + ".w3", h.w3});
    out.push_back({prefix + ".b3", h.b3});
}

Tensor box_head_forward(const Tensor& x, const BoxHeadParams& h) {
    Tensor a = relu(add_bias(matmul(x, h.w1), h.b1));
    Tensor b = relu(add_bias(matmul(a, h.w2), h.b2));
    return sigmoid(add_bias(matmul(b, h.w3), h.b3));
}

}  // namespace

ModelParams make_model_params(const RunConfig& cfg, Rng& rng) {
    validate_config(cfg);
    ModelParams p;
    p.embed_w = make_linear_weight(cfg.channels, cfg.d, rng);
    p.embed_b = make_linear_bias(cfg.channels, cfg.d, rng);
    for (int i = 0; i < cfg.encoder_layers; ++i)
        p.encoder.push_back(make_encoder_layer_params(cfg.d, cfg.heads, rng));
    for (int i = 0; i < cfg.decoder_layers; ++i)
        p.human_decoder.push_back(make_decoder_layer_params(cfg.d, cfg.heads, rng));
    for (int i = 0; i < cfg.decoder_layers; ++i)
        p.object_decoder.push_back(make_decoder_layer_params(cfg.d, cfg.heads, rng));
    for (int i = 0; i < cfg.decoder_layers; ++i)
        p.interaction_decoder.push_back(make_decoder_layer_params(cfg.d, cfg.heads, rng));
    p.q_h = make_query(cfg.n_queries, cfg.d, rng);
    p.q_o = Tensor::from_data(p.q_h.shape(), p.q_h.data(), true);  // equal at init
    p.q_rand = make_query(cfg.n_queries, cfg.d, rng);
    p.human_box_head = make_box_head(cfg.d, rng);
    p.object_box_head = make_box_head(cfg.d, rng);
    p.object_class_w = make_linear_weight(cfg.d, cfg.k_obj + 1, rng);
    p.object_class_b = make_linear_bias(cfg.d, cfg.k_obj + 1, rng);
    p.interaction_w = make_linear_weight(cfg.d, cfg.k_act, rng);
    p.interaction_b = make_linear_bias(cfg.d, cfg.k_act, rng);
    return p;
}

std::vector<NamedParam> named_parameters(const ModelParams& p) {
    std::vector<NamedParam> out;
    out.push_back({"embed.w", p.embed_w});
    out.push_back({"embed.b", p.embed_b});
    for (std::size_t i = 0; i < p.encoder.size(); ++i)
        collect_params(p.encoder[i], "encoder." + std::to_string(i), out);
    for (std::size_t i = 0; i < p.human_decoder.size(); ++i)
        collect_params(p.human_decoder[i], "human_decoder." + std::to_string(i), out);
    for (std::size_t i = 0; i < p.object_decoder.size(); ++i)
        collect_params(p.object_decoder[i], "object_decoder." + std::to_string(i), out);
    for (std::size_t i = 0; i < p.interaction_decoder.size(); ++i)
        collect_params(p.interaction_decoder[i], "interaction_decoder." + std::to_string(i), out);
    out.push_back({"q_h", p.q_h});
    out.push_back({"q_o", p.q_o});
    out.push_back({"q_rand", p.q_rand});
    collect_box_head(p.human_box_head, "human_box_head", out);
    collect_box_head(p.object_box_head, "object_box_head", out);
    out.push_back({"object_class.w", p.object_class_w});
    out.push_back({"object_class.b", p.object_class_b});
    out.push_back({"interaction.w", p.interaction_w});
    out.push_back({"interaction.b", p.interaction_b});
    return out;
}

Tensor positional_encoding(int grid_h, int grid_w, int d) {
    if (d % 4 != 0) throw ConfigError("positional_encoding: d must be divisible by 4");
    const int half = d / 2;
    const int pairs = half / 2;
    std::vector<double> data(static_cast<std::size_t>(grid_h) * grid_w * d);
    for (int r = 0; r < grid_h; ++r) {
        for (int c = 0; c < grid_w; ++c) {
            double* row = data.data() + (static_cast<std::size_t>(r) * grid_w + c) * d;
            const double y = r + 0.5;
            const double x = c + 0.5;
            for (int k = 0; k < pairs; ++k) {
                const double freq = std::pow(10000.0, -2.0 * k / half);
                row[2 * k] = std::sin(y * freq);
                row[2 * k + 1] = std::cos(y * freq);
                row[half + 2 * k] = std::sin(x * freq);
                row[half + 2 * k + 1] = std::cos(x * freq);
            }
        }
    }
    return Tensor::from_data({grid_h * grid_w, d}, std::move(data));
}

EmbeddedScene embed_scene(const Tensor& grid, const ModelParams& params) {
    if (grid.rank() != 3) {
        throw DimensionError("embed_scene: grid must be [C x H x W], got " +
                             shape_string(grid.shape()));
    }
    const int C = grid.dim(0), H = grid.dim(1), W = grid.dim(2);
    if (params.embed_w.dim(0) != C) {
        throw DimensionError("embed_scene: grid has " + std::to_string(C) +
                             " channels but embed expects " + std::to_string(params.embed_w.dim(0)));
    }
    const int L = H * W;
    // The grid is input data, not a parameter, so the [C,H,W] -> [L,C]
    // rearrangement happens outside the graph.
    std::vector<double> cells(static_cast<std::size_t>(L) * C);
    const std::vector<double>& g = grid.data();
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c)
            for (int ch = 0; ch < C; ++ch)
                cells[(static_cast<std::size_t>(r) * W + c) * C + ch] =
                    g[(static_cast<std::size_t>(ch) * H + r) * W + c];
    Tensor cell_matrix = Tensor::from_data({L, C}, std::move(cells));
    EmbeddedScene out;
    out.z_src = add_bias(matmul(cell_matrix, params.embed_w), params.embed_b);
    out.pos = positional_encoding(H, W, params.embed_w.dim(1));
    return out;
}

Tensor detection_decoder_forward(const Tensor& z_e, const Tensor& pos, const Tensor& queries,
                                 const std::vector<DecoderLayerParams>& layers) {
    if (layers.empty()) throw ConfigError("detection decoder needs at least one layer");
    Tensor x = Tensor::zeros(queries.shape());
    for (std::size_t i = 0; i < layers.size(); ++i) {
        x = decoder_layer_forward(x, queries, z_e, pos, layers[i], /*skip_self=*/i == 0);
    }
    return x;
}

Tensor interaction_decoder_forward(const Tensor& z_e, const Tensor& pos, const Tensor& q_h_out,
                                   const Tensor& q_o_out, LinkMode mode,
                                   const std::vector<DecoderLayerParams>& layers,
                                   const Tensor& q_rand, DecoderLayerTrace* layer1_trace) {
    if (layers.empty()) throw ConfigError("interaction decoder needs at least one layer");

    // guide supplies the positional stream, other the first layer's values.
    const bool swapped = mode == LinkMode::object_guide;
    const Tensor& guide = swapped ? q_o_out : q_h_out;
    const Tensor& other = swapped ? q_h_out : q_o_out;

    Tensor x;
    Tensor query_pos;
    switch (mode) {
        case LinkMode::human_guide:
        case LinkMode::object_guide: {
            query_pos = guide;
            Tensor qk = add(guide, other);
            x = decoder_layer_forward(Tensor::zeros(guide.shape()), query_pos, z_e, pos, layers[0],
                                      false, std::optional<Tensor>(qk), std::optional<Tensor>(other),
                                      layer1_trace);
            break;
        }
        case LinkMode::addition_guide: {
            query_pos = add(q_h_out, q_o_out);
            x = decoder_layer_forward(Tensor::zeros(guide.shape()), query_pos, z_e, pos, layers[0],
                                      false, std::optional<Tensor>(query_pos),
                                      std::optional<Tensor>(q_o_out), layer1_trace);
            break;
        }
        case LinkMode::random_guide: {
            query_pos = q_rand;
            Tensor prev0 = add(q_h_out, q_o_out);
            x = decoder_layer_forward(prev0, query_pos, z_e, pos, layers[0], false, std::nullopt,
                                      std::nullopt, layer1_trace);
            break;
        }
        default:
            throw ConfigError("interaction_decoder_forward: unknown link mode");
    }
    for (std::size_t i = 1; i < layers.size(); ++i) {
        x = decoder_layer_forward(x, query_pos, z_e, pos, layers[i]);
    }
    return x;
}

ForwardResult prediction_heads(const Tensor& q_h_out, const Tensor& q_o_out, const Tensor& q_a_out,
                               const ModelParams& params) {
    ForwardResult r;
    r.q_h_out = q_h_out;
    r.q_o_out = q_o_out;
    r.q_a_out = q_a_out;
    r.human_boxes = box_head_forward(q_h_out, params.human_box_head);
    r.object_boxes = box_head_forward(q_o_out, params.object_box_head);
    r.object_logits = add_bias(matmul(q_o_out, params.object_class_w), params.object_class_b);
    r.action_logits = add_bias(matmul(q_a_out, params.interaction_w), params.interaction_b);

    const int n = q_h_out.dim(0);
    const int k_obj1 = r.object_logits.dim(1);
    const int k_act = r.action_logits.dim(1);
    for (int i = 0; i < n; ++i) {
        HOIPrediction pred;
        for (int j = 0; j < 4; ++j) {
            pred.human_box[j] = r.human_boxes.at(i, j);
            pred.object_box[j] = r.object_boxes.at(i, j);
        }
        pred.object_class_logits.resize(k_obj1);
        for (int j = 0; j < k_obj1; ++j) pred.object_class_logits[j] = r.object_logits.at(i, j);
        pred.interaction_logits.resize(k_act);
        for (int j = 0; j < k_act; ++j) pred.interaction_logits[j] = r.action_logits.at(i, j);
        r.predictions.push_back(std::move(pred));
    }
    return r;
}

ForwardResult model_forward(const SceneSample& scene, const ModelParams& params, LinkMode mode,
                            bool sg_enabled) {
    EmbeddedScene embedded = embed_scene(scene.feature_grid, params);
    Tensor z_e = encoder_forward(embedded.z_src, embedded.pos, params.encoder);
    Tensor q_h_out = detection_decoder_forward(z_e, embedded.pos, params.q_h, params.human_decoder);
    Tensor q_o_out =
        detection_decoder_forward(z_e, embedded.pos, params.q_o, params.object_decoder);
    // Interaction losses must not update the object decoder or q_o: the
    // interaction decoder sees a gradient-blocked view, while the object
    // heads keep the live tensor.
    Tensor q_o_for_interaction = sg_enabled ? stop_gradient(q_o_out) : q_o_out;
    DecoderLayerTrace trace;
    Tensor q_a_out = interaction_decoder_forward(z_e, embedded.pos, q_h_out, q_o_for_interaction,
                                                 mode, params.interaction_decoder, params.q_rand,
                                                 &trace);
    ForwardResult r = prediction_heads(q_h_out, q_o_out, q_a_out, params);
    r.interaction_layer1 = trace;
    return r;
}

}  // namespace hoi
