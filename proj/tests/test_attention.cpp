#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "hoi/attention.hpp"
#include "hoi/errors.hpp"
#include "hoi/gradcheck.hpp"
#include "hoi/rng.hpp"

using namespace hoi;

namespace {

Tensor rand_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                   bool requires_grad = false) {
    std::vector<double> data(shape_numel(shape));
    for (double& v : data) v = rng.uniform(lo, hi);
    return Tensor::from_data(std::move(shape), std::move(data), requires_grad);
}

Tensor identity_matrix(int d) {
    std::vector<double> data(static_cast<std::size_t>(d) * d, 0.0);
    for (int i = 0; i < d; ++i) data[static_cast<std::size_t>(i) * d + i] = 1.0;
    return Tensor::from_data({d, d}, std::move(data));
}

// All projections identity, all biases zero.
MhaParams identity_mha(int d, int heads) {
    MhaParams p;
    p.head_count = heads;
    p.model_dim = d;
    p.wq = identity_matrix(d);
    p.wk = identity_matrix(d);
    p.wv = identity_matrix(d);
    p.wo = identity_matrix(d);
    p.bq = Tensor::zeros({d});
    p.bk = Tensor::zeros({d});
    p.bv = Tensor::zeros({d});
    p.bo = Tensor::zeros({d});
    return p;
}

// Plain-double single-head attention used as an independent oracle.
std::vector<double> oracle_single_head(const std::vector<double>& q, const std::vector<double>& k,
                                       const std::vector<double>& v, int n_q, int n_k, int d) {
    std::vector<double> out(static_cast<std::size_t>(n_q) * d, 0.0);
    for (int i = 0; i < n_q; ++i) {
        std::vector<double> logits(n_k, 0.0);
        for (int j = 0; j < n_k; ++j) {
            double dot = 0.0;
            for (int c = 0; c < d; ++c) dot += q[i * d + c] * k[j * d + c];
            logits[j] = dot / std::sqrt(static_cast<double>(d));
        }
        double mx = logits[0];
        for (double l : logits) mx = std::max(mx, l);
        double denom = 0.0;
        std::vector<double> w(n_k);
        for (int j = 0; j < n_k; ++j) {
            w[j] = std::exp(logits[j] - mx);
            denom += w[j];
        }
        for (int j = 0; j < n_k; ++j)
            for (int c = 0; c < d; ++c) out[i * d + c] += (w[j] / denom) * v[j * d + c];
    }
    return out;
}

std::vector<NamedParam> mha_param_list(const MhaParams& p, const std::string& prefix) {
    std::vector<NamedParam> out;
    collect_params(p, prefix, out);
    return out;
}

// Plain mean of a layer-norm output is constant when the gain is still at its
// init value of one (each normalized row sums to zero), so FD checks on
// norm-terminated blocks need an asymmetric readout. Draw the coefficients
// once, outside the checked function, to keep it deterministic.
Tensor readout_coeffs(Shape shape, Rng& rng) {
    std::vector<double> data(shape_numel(shape));
    for (double& v : data) v = rng.uniform(-1.0, 1.0);
    return Tensor::from_data(std::move(shape), std::move(data));
}

}  // namespace

TEST_CASE("zero logits average the value rows uniformly") {
    for (int heads : {1, 2}) {
        Rng rng(41 + heads);
        const int d = 4, n_k = 3, n_q = 2;
        MhaParams p = identity_mha(d, heads);
        Tensor q_in = Tensor::zeros({n_q, d});
        Tensor k_in = Tensor::zeros({n_k, d});
        Tensor v_in = rand_tensor({n_k, d}, rng);
        Tensor out = multi_head_attention(q_in, k_in, v_in, nullptr, nullptr, p);
        for (int i = 0; i < n_q; ++i) {
            for (int c = 0; c < d; ++c) {
                double expect = 0.0;
                for (int j = 0; j < n_k; ++j) expect += v_in.at(j, c);
                expect /= n_k;
                CHECK(out.at(i, c) == doctest::Approx(expect).epsilon(1e-14));
            }
        }
    }
}

TEST_CASE("positions influence logits only, never the value path") {
    Rng rng(43);
    const int d = 4;
    MhaParams p = identity_mha(d, 1);
    Tensor q_in = Tensor::zeros({2, d});
    Tensor k_in = Tensor::zeros({3, d});
    Tensor v_in = rand_tensor({3, d}, rng);
    // Constant identical position rows shift every logit equally, so softmax
    // and therefore the output cannot change.
    Tensor q_pos = Tensor::constant({2, d}, 0.7);
    Tensor k_pos = Tensor::constant({3, d}, 0.7);
    Tensor base = multi_head_attention(q_in, k_in, v_in, nullptr, nullptr, p);
    Tensor shifted = multi_head_attention(q_in, k_in, v_in, &q_pos, &k_pos, p);
    for (int i = 0; i < 2; ++i)
        for (int c = 0; c < d; ++c)
            CHECK(base.at(i, c) == doctest::Approx(shifted.at(i, c)).epsilon(1e-12));
}

TEST_CASE("single head matches a hand-rolled oracle") {
    Rng rng(47);
    const int d = 2, n_q = 2, n_k = 2;
    MhaParams p = identity_mha(d, 1);
    Tensor q_in = rand_tensor({n_q, d}, rng);
    Tensor k_in = rand_tensor({n_k, d}, rng);
    Tensor v_in = rand_tensor({n_k, d}, rng);
    Tensor out = multi_head_attention(q_in, k_in, v_in, nullptr, nullptr, p);
    auto expect = oracle_single_head(q_in.data(), k_in.data(), v_in.data(), n_q, n_k, d);
    for (int i = 0; i < n_q; ++i)
        for (int c = 0; c < d; ++c)
            CHECK(out.at(i, c) == doctest::Approx(expect[i * d + c]).epsilon(1e-12));
}

TEST_CASE("permuting keys and values together leaves the output unchanged") {
    Rng rng(53);
    const int d = 8, n_q = 3, n_k = 5;
    MhaParams p = make_mha_params(d, 2, rng);
    Tensor q_in = rand_tensor({n_q, d}, rng);
    Tensor k_in = rand_tensor({n_k, d}, rng);
    Tensor v_in = rand_tensor({n_k, d}, rng);
    Tensor k_pos = rand_tensor({n_k, d}, rng);
    Tensor q_pos = rand_tensor({n_q, d}, rng);

    const std::vector<int> perm = {3, 0, 4, 1, 2};
    auto permute_rows = [&](const Tensor& t) {
        std::vector<double> data(t.numel());
        for (int i = 0; i < n_k; ++i)
            for (int c = 0; c < d; ++c) data[i * d + c] = t.at(perm[i], c);
        return Tensor::from_data(t.shape(), std::move(data));
    };
    Tensor kp = permute_rows(k_in);
    Tensor vp = permute_rows(v_in);
    Tensor pp = permute_rows(k_pos);

    Tensor base = multi_head_attention(q_in, k_in, v_in, &q_pos, &k_pos, p);
    Tensor permuted = multi_head_attention(q_in, kp, vp, &q_pos, &pp, p);
    for (int i = 0; i < n_q; ++i)
        for (int c = 0; c < d; ++c)
            CHECK(base.at(i, c) == doctest::Approx(permuted.at(i, c)).epsilon(1e-12));
}

TEST_CASE("attention weights are row-stochastic") {
    Rng rng(59);
    const int d = 8;
    MhaParams p = make_mha_params(d, 2, rng);
    Tensor q_in = rand_tensor({4, d}, rng);
    Tensor k_in = rand_tensor({6, d}, rng);
    MhaTrace trace;
    multi_head_attention(q_in, k_in, k_in, nullptr, nullptr, p, &trace);
    REQUIRE(trace.head_attn.size() == 2);
    for (const Tensor& attn : trace.head_attn) {
        for (int i = 0; i < attn.dim(0); ++i) {
            double row = 0.0;
            for (int j = 0; j < attn.dim(1); ++j) row += attn.at(i, j);
            CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("attention gradients match finite differences") {
    Rng rng(61);
    const int d = 8;
    MhaParams p = make_mha_params(d, 2, rng);
    Tensor q_in = rand_tensor({3, d}, rng, -1.0, 1.0, true);
    Tensor k_in = rand_tensor({4, d}, rng, -1.0, 1.0, true);
    Tensor v_in = rand_tensor({4, d}, rng, -1.0, 1.0, true);
    Tensor q_pos = rand_tensor({3, d}, rng);
    Tensor k_pos = rand_tensor({4, d}, rng);
    auto f = [&]() { return mean(multi_head_attention(q_in, k_in, v_in, &q_pos, &k_pos, p)); };
    std::vector<NamedParam> params = mha_param_list(p, "mha");
    params.push_back({"q_in", q_in});
    params.push_back({"k_in", k_in});
    params.push_back({"v_in", v_in});
    auto report = finite_diff_check(f, params, 1e-5, 1e-4);
    CHECK(report.all_pass);
}

TEST_CASE("mha validates shapes and head divisibility") {
    Rng rng(67);
    MhaParams p = make_mha_params(8, 2, rng);
    Tensor ok = Tensor::zeros({2, 8});
    Tensor bad = Tensor::zeros({2, 6});
    CHECK_THROWS_AS(multi_head_attention(bad, ok, ok, nullptr, nullptr, p), DimensionError);
    CHECK_THROWS_AS(multi_head_attention(ok, Tensor::zeros({3, 8}), Tensor::zeros({4, 8}), nullptr,
                                         nullptr, p),
                    DimensionError);
    p.head_count = 3;
    CHECK_THROWS_AS(multi_head_attention(ok, ok, ok, nullptr, nullptr, p), ConfigError);
}

TEST_CASE("decoder layer with skip_self ignores self-attention parameters") {
    Rng rng(71);
    const int d = 8, n = 3, l = 5;
    DecoderLayerParams a = make_decoder_layer_params(d, 2, rng);
    DecoderLayerParams b = a;
    Rng rng2(997);
    b.self_attn = make_mha_params(d, 2, rng2);

    Tensor prev = Tensor::zeros({n, d});
    Tensor query_pos = rand_tensor({n, d}, rng);
    Tensor memory = rand_tensor({l, d}, rng);
    Tensor memory_pos = rand_tensor({l, d}, rng);
    Tensor ya = decoder_layer_forward(prev, query_pos, memory, memory_pos, a, true);
    Tensor yb = decoder_layer_forward(prev, query_pos, memory, memory_pos, b, true);
    CHECK(ya.data() == yb.data());
    CHECK(ya.dim(0) == n);
    CHECK(ya.dim(1) == d);
}

TEST_CASE("decoder layer rejects skip_self combined with overrides") {
    Rng rng(73);
    const int d = 8;
    DecoderLayerParams p = make_decoder_layer_params(d, 2, rng);
    Tensor prev = Tensor::zeros({2, d});
    Tensor pos = Tensor::zeros({2, d});
    Tensor mem = Tensor::zeros({3, d});
    CHECK_THROWS_AS(
        decoder_layer_forward(prev, pos, mem, mem, p, true, std::optional<Tensor>(prev)),
        ConfigError);
}

TEST_CASE("zero value override makes the self-attention sublayer exactly zero") {
    Rng rng(79);
    const int d = 8, n = 3;
    DecoderLayerParams p = make_decoder_layer_params(d, 2, rng);
    // Value and output projection biases must be zero for the sublayer output
    // to vanish with a zero value input.
    p.self_attn.bv = Tensor::zeros({d});
    p.self_attn.bo = Tensor::zeros({d});

    Tensor qk = rand_tensor({n, d}, rng);
    Tensor zeros = Tensor::zeros({n, d});
    Tensor pos = rand_tensor({n, d}, rng);
    Tensor mem = rand_tensor({4, d}, rng);
    DecoderLayerTrace trace;
    decoder_layer_forward(zeros, pos, mem, mem, p, false, std::optional<Tensor>(qk),
                          std::optional<Tensor>(zeros), &trace);
    REQUIRE(trace.has_self);
    for (double v : trace.self_attn_out.data()) CHECK(v == 0.0);
}

TEST_CASE("decoder layer gradients match finite differences") {
    Rng rng(83);
    const int d = 8, n = 2, l = 3;
    DecoderLayerParams p = make_decoder_layer_params(d, 2, rng);
    Tensor prev = rand_tensor({n, d}, rng, -1.0, 1.0, true);
    Tensor query_pos = rand_tensor({n, d}, rng, -1.0, 1.0, true);
    Tensor memory = rand_tensor({l, d}, rng, -1.0, 1.0, true);
    Tensor memory_pos = rand_tensor({l, d}, rng);
    Tensor coeffs = readout_coeffs({n, d}, rng);
    auto f = [&]() {
        return mean(mul(decoder_layer_forward(prev, query_pos, memory, memory_pos, p), coeffs));
    };
    std::vector<NamedParam> params;
    collect_params(p, "layer", params);
    params.push_back({"prev", prev});
    params.push_back({"query_pos", query_pos});
    params.push_back({"memory", memory});
    auto report = finite_diff_check(f, params, 1e-5, 1e-4);
    CHECK(report.all_pass);
}

TEST_CASE("encoder with zero layers is the identity")
{
    Rng rng(89);
    Tensor z = rand_tensor({5, 8}, rng);
    Tensor pos = rand_tensor({5, 8}, rng);
    Tensor out = encoder_forward(z, pos, {});
    CHECK(out.data() == z.data());
}

TEST_CASE("encoder is permutation-equivariant over tokens") {
    Rng rng(97);
    const int d = 8, l = 4;
    std::vector<EncoderLayerParams> layers = {make_encoder_layer_params(d, 2, rng),
                                              make_encoder_layer_params(d, 2, rng)};
    Tensor z = rand_tensor({l, d}, rng);
    Tensor pos = rand_tensor({l, d}, rng);
    const std::vector<int> perm = {2, 0, 3, 1};
    auto permute_rows = [&](const Tensor& t) {
        std::vector<double> data(t.numel());
        for (int i = 0; i < l; ++i)
            for (int c = 0; c < d; ++c) data[i * d + c] = t.at(perm[i], c);
        return Tensor::from_data(t.shape(), std::move(data));
    };
    Tensor base = encoder_forward(z, pos, layers);
    Tensor permuted = encoder_forward(permute_rows(z), permute_rows(pos), layers);
    for (int i = 0; i < l; ++i)
        for (int c = 0; c < d; ++c)
            CHECK(permuted.at(i, c) == doctest::Approx(base.at(perm[i], c)).epsilon(1e-12));
}

TEST_CASE("plain sum readout over a norm-terminated encoder sees only vanishing gradients") {
    // With gain still at its init value of one, each layer-norm row sums to
    // zero, so sum(encoder output) is constant; the check passes because both
    // sides of every comparison vanish.
    Rng rng(103);
    const int d = 8, l = 4;
    std::vector<EncoderLayerParams> layers = {make_encoder_layer_params(d, 2, rng),
                                              make_encoder_layer_params(d, 2, rng)};
    Tensor z = rand_tensor({l, d}, rng, -1.0, 1.0, true);
    Tensor pos = rand_tensor({l, d}, rng);
    auto f = [&]() { return sum(encoder_forward(z, pos, layers)); };
    std::vector<NamedParam> params;
    collect_params(layers[0], "enc0", params);
    params.push_back({"z", z});
    auto report = finite_diff_check(f, params, 1e-5, 1e-4);
    CHECK(report.all_pass);
}

TEST_CASE("encoder gradients match finite differences") {
    Rng rng(101);
    const int d = 8, l = 4;
    std::vector<EncoderLayerParams> layers = {make_encoder_layer_params(d, 2, rng),
                                              make_encoder_layer_params(d, 2, rng)};
    Tensor z = rand_tensor({l, d}, rng, -1.0, 1.0, true);
    Tensor pos = rand_tensor({l, d}, rng);
    Tensor coeffs = readout_coeffs({l, d}, rng);
    auto f = [&]() { return mean(mul(encoder_forward(z, pos, layers), coeffs)); };
    std::vector<NamedParam> params;
    collect_params(layers[0], "enc0", params);
    collect_params(layers[1], "enc1", params);
    params.push_back({"z", z});
    auto report = finite_diff_check(f, params, 1e-5, 1e-4);
    CHECK(report.all_pass);
}
