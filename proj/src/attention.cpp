#include "hoi/attention.hpp"

#include <cmath>

#include "hoi/errors.hpp"

namespace hoi {

namespace {

void validate_mha(const MhaParams& p) {
    if (p.head_count < 1 || p.model_dim < 1 || p.model_dim % p.head_count != 0) {
        throw ConfigError("multi_head_attention: model_dim " + std::to_string(p.model_dim) +
                          " not divisible by head_count " + std::to_string(p.head_count));
    }
}

Tensor project(const Tensor& x, const Tensor& w, const Tensor& b) {
    return add_bias(matmul(x, w), b);
}

}  // namespace

Tensor multi_head_attention(const Tensor& q_in, const Tensor& k_in, const Tensor& v_in,
                            const Tensor* q_pos, const Tensor* k_pos, const MhaParams& params,
                            MhaTrace* trace) {
    validate_mha(params);
    const int d = params.model_dim;
    if (q_in.rank() != 2 || q_in.dim(1) != d || k_in.rank() != 2 || k_in.dim(1) != d ||
        v_in.rank() != 2 || v_in.dim(1) != d) {
        throw DimensionError("multi_head_attention: inputs " + shape_string(q_in.shape()) + ", " +
                             shape_string(k_in.shape()) + ", " + shape_string(v_in.shape()) +
                             " for model_dim " + std::to_string(d));
    }
    if (k_in.dim(0) != v_in.dim(0)) {
        throw DimensionError("multi_head_attention: key rows " + shape_string(k_in.shape()) +
                             " vs value rows " + shape_string(v_in.shape()));
    }

    const Tensor q_base = q_pos != nullptr ? add(q_in, *q_pos) : q_in;
    const Tensor k_base = k_pos != nullptr ? add(k_in, *k_pos) : k_in;
    const Tensor q = project(q_base, params.wq, params.bq);
    const Tensor k = project(k_base, params.wk, params.bk);
    const Tensor v = project(v_in, params.wv, params.bv);

    const int d_head = d / params.head_count;
    const double scale = 1.0 / std::sqrt(static_cast<double>(d_head));
    std::vector<Tensor> heads;
    heads.reserve(params.head_count);
    for (int h = 0; h < params.head_count; ++h) {
        const int c0 = h * d_head;
        const Tensor qh = slice(q, 0, q.dim(0), c0, d_head);
        const Tensor kh = slice(k, 0, k.dim(0), c0, d_head);
        const Tensor vh = slice(v, 0, v.dim(0), c0, d_head);
        const Tensor logits = scalar_mul(matmul(qh, transpose(kh)), scale);
        const Tensor attn = softmax_lastdim(logits);
        if (trace != nullptr) trace->head_attn.push_back(attn);
        heads.push_back(matmul(attn, vh));
    }
    return project(concat_cols(heads), params.wo, params.bo);
}

Tensor decoder_layer_forward(const Tensor& prev, const Tensor& query_pos, const Tensor& memory,
                             const Tensor& memory_pos, const DecoderLayerParams& params,
                             bool skip_self, const std::optional<Tensor>& self_qk_override,
                             const std::optional<Tensor>& self_value_override,
                             DecoderLayerTrace* trace) {
    if (skip_self && (self_qk_override.has_value() || self_value_override.has_value())) {
        throw ConfigError("decoder_layer_forward: skip_self cannot be combined with overrides");
    }

    Tensor x = prev;
    if (!skip_self) {
        const Tensor& qk = self_qk_override.has_value() ? *self_qk_override : prev;
        const Tensor& value = self_value_override.has_value() ? *self_value_override : prev;
        // An override already carries its positional content, so no extra
        // positional term is added in that case.
        const Tensor* pos = self_qk_override.has_value() ? nullptr : &query_pos;
        const Tensor attn = multi_head_attention(qk, qk, value, pos, pos, params.self_attn);
        if (trace != nullptr) {
            trace->self_attn_out = attn;
            trace->has_self = true;
        }
        x = layer_norm(add(qk, attn), params.norm1.gain, params.norm1.bias, 1e-5);
    }

    const Tensor cross =
        multi_head_attention(x, memory, memory, &query_pos, &memory_pos, params.cross_attn);
    x = layer_norm(add(x, cross), params.norm2.gain, params.norm2.bias, 1e-5);

    const Tensor hidden = relu(add_bias(matmul(x, params.ffn.w1), params.ffn.b1));
    const Tensor ffn_out = add_bias(matmul(hidden, params.ffn.w2), params.ffn.b2);
    return layer_norm(add(x, ffn_out), params.norm3.gain, params.norm3.bias, 1e-5);
}

Tensor encoder_layer_forward(const Tensor& x, const Tensor& pos, const EncoderLayerParams& params) {
    const Tensor attn = multi_head_attention(x, x, x, &pos, &pos, params.self_attn);
    Tensor y = layer_norm(add(x, attn), params.norm1.gain, params.norm1.bias, 1e-5);
    const Tensor hidden = relu(add_bias(matmul(y, params.ffn.w1), params.ffn.b1));
    const Tensor ffn_out = add_bias(matmul(hidden, params.ffn.w2), params.ffn.b2);
    return layer_norm(add(y, ffn_out), params.norm2.gain, params.norm2.bias, 1e-5);
}

Tensor encoder_forward(const Tensor& z_src, const Tensor& pos,
                       const std::vector<EncoderLayerParams>& layers) {
    Tensor x = z_src;
    for (const EncoderLayerParams& layer : layers) x = encoder_layer_forward(x, pos, layer);
    return x;
}

Tensor make_linear_weight(int fan_in, int fan_out, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> data(static_cast<std::size_t>(fan_in) * fan_out);
    for (double& v : data) v = rng.uniform(-bound, bound);
    return Tensor::from_data({fan_in, fan_out}, std::move(data), true);
}

Tensor make_linear_bias(int fan_in, int fan_out, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> data(fan_out);
    for (double& v : data) v = rng.uniform(-bound, bound);
    return Tensor::from_data({fan_out}, std::move(data), true);
}

LayerNormParams make_layer_norm_params(int d) {
    return {Tensor::from_data(Shape{d}, std::vector<double>(d, 1.0), true),
            Tensor::from_data(Shape{d}, std::vector<double>(d, 0.0), true)};
}

MhaParams make_mha_params(int d, int head_count, Rng& rng) {
    MhaParams p;
    p.head_count = head_count;
    p.model_dim = d;
    p.wq = make_linear_weight(d, d, rng);
    p.bq = make_linear_bias(d, d, rng);
    p.wk = make_linear_weight(d, d, rng);
    p.bk = make_linear_bias(d, d, rng);
    p.wv = make_linear_weight(d, d, rng);
    p.bv = make_linear_bias(d, d, rng);
    p.wo = make_linear_weight(d, d, rng);
    p.bo = make_linear_bias(d, d, rng);
    return p;
}

FfnParams make_ffn_params(int d, int hidden, Rng& rng) {
    FfnParams p;
    p.w1 = make_linear_weight(d, hidden, rng);
    p.b1 = make_linear_bias(d, hidden, rng);
    p.w2 = make_linear_weight(hidden, d, rng);
    p.b2 = make_linear_bias(hidden, d, rng);
    return p;
}

EncoderLayerParams make_encoder_layer_params(int d, int head_count, Rng& rng) {
    EncoderLayerParams p;
    p.self_attn = make_mha_params(d, head_count, rng);
    p.ffn = make_ffn_params(d, 4 * d, rng);
    p.norm1 = make_layer_norm_params(d);
    p.norm2 = make_layer_norm_params(d);
    return p;
}

DecoderLayerParams make_decoder_layer_params(int d, int head_count, Rng& rng) {
    DecoderLayerParams p;
    p.self_attn = make_mha_params(d, head_count, rng);
    p.cross_attn = make_mha_params(d, head_count, rng);
    p.ffn = make_ffn_params(d, 4 * d, rng);
    p.norm1 = make_layer_norm_params(d);
    p.norm2 = make_layer_norm_params(d);
    p.norm3 = make_layer_norm_params(d);
    return p;
}

void collect_params(const LayerNormParams& p, const std::string& prefix,
                    std::vector<NamedParam>& out) {
    out.push_back({prefix + ".gain", p.gain});
    out.push_back({prefix + ".bias", p.bias});
}

void collect_params(const MhaParams& p, const std::string& prefix, std::vector<NamedParam>& out) {
    out.push_back({prefix + ".wq", p.wq});
    out.push_back({prefix + ".bq", p.bq});
    out.push_back({prefix + ".wk", p.wk});
    out.push_back({prefix + ".bk", p.bk});
    out.push_back({prefix + ".wv", p.wv});
    out.push_back({prefix + ".bv", p.bv});
    out.push_back({prefix + ".wo", p.wo});
    out.push_back({prefix + ".bo", p.bo});
}

void collect_params(const FfnParams& p, const std::string& prefix, std::vector<NamedParam>& out) {
    out.push_back({prefix + ".w1", p.w1});
    out.push_back({prefix + ".b1", p.b1});
    out.push_back({prefix + ".w2", p.w2});
    out.push_back({prefix + ".b2", p.b2});
}

void collect_params(const EncoderLayerParams& p, const std::string& prefix,
                    std::vector<NamedParam>& out) {
    collect_params(p.self_attn, prefix + ".self_attn", out);
    collect_params(p.ffn, prefix + ".ffn", out);
    collect_params(p.norm1, prefix + ".norm1", out);
    collect_params(p.norm2, prefix + ".norm2", out);
}

void collect_params(const DecoderLayerParams& p, const std::string& prefix,
                    std::vector<NamedParam>& out) {
    collect_params(p.self_attn, prefix + ".self_attn", out);
    collect_params(p.cross_attn, prefix + ".cross_attn", out);
    collect_params(p.ffn, prefix + ".ffn", out);
    collect_params(p.norm1, prefix + ".norm1", out);
    collect_params(p.norm2, prefix + ".norm2", out);
    collect_params(p.norm3, prefix + ".norm3", out);
}

}  // namespace hoi
