#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hoi/rng.hpp"
#include "hoi/tensor.hpp"

namespace hoi {

struct LayerNormParams {
    Tensor gain;  // [d]
    Tensor bias;  // [d]
};

// Projections are stored combined as [d x d]; head h owns the column block
// [h*d/heads, (h+1)*d/heads) of each projection.
struct MhaParams {
    int head_count = 0;
    int model_dim = 0;
    Tensor wq, bq;
    Tensor wk, bk;
    Tensor wv, bv;
    Tensor wo, bo;
};

struct FfnParams {
    Tensor w1, b1;  // d -> hidden
    Tensor w2, b2;  // hidden -> d
};

struct EncoderLayerParams {
    MhaParams self_attn;
    FfnParams ffn;
    LayerNormParams norm1, norm2;
};

struct DecoderLayerParams {
    MhaParams self_attn;
    MhaParams cross_attn;
    FfnParams ffn;
    LayerNormParams norm1, norm2, norm3;
};

// Per-head attention weights, captured on request for inspection.
struct MhaTrace {
    std::vector<Tensor> head_attn;  // each [n_q x n_k], rows stochastic
};

// Captured intermediate of a decoder layer.
struct DecoderLayerTrace {
    Tensor self_attn_out;  // pre-residual self-attention sublayer output
    bool has_self = false;
};

// Scaled dot-product attention with positional terms added to the query and
// key inputs only; the value path never sees positions. Null positions mean
// zero. Scale is 1/sqrt(d/head_count).
Tensor multi_head_attention(const Tensor& q_in, const Tensor& k_in, const Tensor& v_in,
                            const Tensor* q_pos, const Tensor* k_pos, const MhaParams& params,
                            MhaTrace* trace = nullptr);

// Post-norm transformer decoder layer: self-attention, cross-attention into
// (memory, memory_pos), then a ReLU FFN, each wrapped residual + layer norm.
//
// self_qk_override replaces both the query and key input of self-attention
// (positions are not added on top); self_value_override replaces its value
// input. The self-attention residual starts from the qk input actually used.
// skip_self drops the self-attention sublayer entirely and cannot be combined
// with an override.
Tensor decoder_layer_forward(const Tensor& prev, const Tensor& query_pos, const Tensor& memory,
                             const Tensor& memory_pos, const DecoderLayerParams& params,
                             bool skip_self = false,
                             const std::optional<Tensor>& self_qk_override = std::nullopt,
                             const std::optional<Tensor>& self_value_override = std::nullopt,
                             DecoderLayerTrace* trace = nullptr);

Tensor encoder_layer_forward(const Tensor& x, const Tensor& pos, const EncoderLayerParams& params);

// Composition of encoder layers; an empty list is the identity.
Tensor encoder_forward(const Tensor& z_src, const Tensor& pos,
                       const std::vector<EncoderLayerParams>& layers);

// Parameter construction. Weights are uniform in +-1/sqrt(fan_in); layer norm
// starts at gain 1, bias 0.
Tensor make_linear_weight(int fan_in, int fan_out, Rng& rng);
Tensor make_linear_bias(int fan_in, int fan_out, Rng& rng);
LayerNormParams make_layer_norm_params(int d);
MhaParams make_mha_params(int d, int head_count, Rng& rng);
FfnParams make_ffn_params(int d, int hidden, Rng& rng);
EncoderLayerParams make_encoder_layer_params(int d, int head_count, Rng& rng);
DecoderLayerParams make_decoder_layer_params(int d, int head_count, Rng& rng);

void collect_params(const LayerNormParams& p, const std::string& prefix,
                    std::vector<NamedParam>& out);
void collect_params(const MhaParams& p, const std::string& prefix, std::vector<NamedParam>& out);
void collect_params(const FfnParams& p, const std::string& prefix, std::vector<NamedParam>& out);
void collect_params(const EncoderLayerParams& p, const std::string& prefix,
                    std::vector<NamedParam>& out);
void collect_params(const DecoderLayerParams& p, const std::string& prefix,
                    std::vector<NamedParam>& out);

}  // namespace hoi
