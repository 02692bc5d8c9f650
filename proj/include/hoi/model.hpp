#pragma once

#include <array>
#include <vector>

#include "hoi/attention.hpp"
#include "hoi/config.hpp"
#include "hoi/data.hpp"
#include "hoi/rng.hpp"
#include "hoi/tensor.hpp"

namespace hoi {

// 3-layer box-regression head: affine+relu twice, then affine to 4 and
// sigmoid.
struct BoxHeadParams {
    Tensor w1, b1, w2, b2, w3, b3;
};

struct ModelParams {
    Tensor embed_w;  // [C x d]
    Tensor embed_b;  // [d]
    std::vector<EncoderLayerParams> encoder;
    std::vector<DecoderLayerParams> human_decoder;
    std::vector<DecoderLayerParams> object_decoder;
    std::vector<DecoderLayerParams> interaction_decoder;
    Tensor q_h;     // [N x d] learnable queries, human decoder
    Tensor q_o;     // [N x d] equal to q_h at initialization
    Tensor q_rand;  // [N x d] positional source for random_guide; always allocated
    BoxHeadParams human_box_head;
    BoxHeadParams object_box_head;
    Tensor object_class_w;  // [d x (K_obj+1)], last column = background
    Tensor object_class_b;
    Tensor interaction_w;  // [d x K_act]
    Tensor interaction_b;
};

// Seed-controlled initialization: weights uniform in +/-1/sqrt(fan_in),
// queries normal(0, 0.02) with q_o copied from q_h bit-exactly.
ModelParams make_model_params(const RunConfig& cfg, Rng& rng);

// Fixed registration order; this order defines optimizer iteration and the
// checkpoint layout.
std::vector<NamedParam> named_parameters(const ModelParams& params);

// Fixed 2-D sinusoidal encoding over grid cell centers, [H*W x d] row-major.
Tensor positional_encoding(int grid_h, int grid_w, int d);

// Per-cell linear projection of the [C x H x W] grid plus the positional
// encoding; both [L x d] with L = H*W, row-major over (row, col).
struct EmbeddedScene {
    Tensor z_src;
    Tensor pos;
};
EmbeddedScene embed_scene(const Tensor& grid, const ModelParams& params);

// Vanilla query decoder: prev_0 = 0, query_pos = queries in every layer,
// first layer skips self-attention (zero input makes it vacuous).
Tensor detection_decoder_forward(const Tensor& z_e, const Tensor& pos, const Tensor& queries,
                                 const std::vector<DecoderLayerParams>& layers);

// Interaction decoder with the guide-linking variants. q_rand is consulted
// only in random_guide mode. layer1_trace, when given, receives the first
// layer's self-attention sublayer output (pre-residual).
Tensor interaction_decoder_forward(const Tensor& z_e, const Tensor& pos, const Tensor& q_h_out,
                                   const Tensor& q_o_out, LinkMode mode,
                                   const std::vector<DecoderLayerParams>& layers,
                                   const Tensor& q_rand,
                                   DecoderLayerTrace* layer1_trace = nullptr);

struct HOIPrediction {
    std::array<double, 4> human_box{};  // cx, cy, w, h in (0,1)
    std::array<double, 4> object_box{};
    std::vector<double> object_class_logits;  // K_obj+1
    std::vector<double> interaction_logits;   // K_act
};

struct ForwardResult {
    Tensor human_boxes;        // [N x 4], sigmoid outputs
    Tensor object_boxes;       // [N x 4]
    Tensor object_logits;      // [N x (K_obj+1)]
    Tensor action_logits;      // [N x K_act]
    Tensor q_h_out, q_o_out, q_a_out;  // [N x d]; q_o_out is the live tensor
    DecoderLayerTrace interaction_layer1;
    std::vector<HOIPrediction> predictions;  // detached per-slot copies
};

// Heads only: human box from q_h_out, object box and class from q_o_out,
// actions from q_a_out.
ForwardResult prediction_heads(const Tensor& q_h_out, const Tensor& q_o_out, const Tensor& q_a_out,
                               const ModelParams& params);

// Full pipeline: embed -> encoder -> human/object decoders -> (stop_gradient
// on the interaction decoder's view of q_o_out when sg_enabled) ->
// interaction decoder -> heads. Forward values never depend on sg_enabled.
ForwardResult model_forward(const SceneSample& scene, const ModelParams& params, LinkMode mode,
                            bool sg_enabled);

}  // namespace hoi
