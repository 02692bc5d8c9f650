#include "hoi/optimizer.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "hoi/errors.hpp"

namespace hoi {

AdamW::AdamW(std::vector<NamedParam> params, AdamWConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
    if (!(cfg_.lr > 0.0)) throw ParameterError("adamw: learning rate must be positive");
    if (!(cfg_.beta1 >= 0.0 && cfg_.beta1 < 1.0) || !(cfg_.beta2 >= 0.0 && cfg_.beta2 < 1.0))
        throw ParameterError("adamw: betas must lie in [0, 1)");
    if (!(cfg_.eps > 0.0)) throw ParameterError("adamw: eps must be positive");
    if (cfg_.weight_decay < 0.0) throw ParameterError("adamw: weight decay must be nonnegative");

    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
        if (!p.tensor.defined() || !p.tensor.is_leaf() || !p.tensor.requires_grad())
            throw ParameterError("adamw: '" + p.name + "' is not a trainable leaf");
        m_.emplace_back(p.tensor.data().size(), 0.0);
        v_.emplace_back(p.tensor.data().size(), 0.0);
    }
}

void AdamW::step(const GradientMap& grads) {
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));

    for (size_t i = 0; i < params_.size(); ++i) {
        const Tensor& p = params_[i].tensor;
        const std::vector<double> g = grads.get_or_zeros(p);
        if (g.size() != p.data().size())
            throw DimensionError("adamw: gradient for '" + params_[i].name + "' has " +
                                 std::to_string(g.size()) + " values, parameter has " +
                                 std::to_string(p.data().size()));

        std::vector<double> w = p.data();
        std::vector<double>& m = m_[i];
        std::vector<double>& v = v_[i];
        for (size_t j = 0; j < w.size(); ++j) {
            m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
            v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
            const double m_hat = m[j] / bc1;
            const double v_hat = v[j] / bc2;
            w[j] -= cfg_.lr * (m_hat / (std::sqrt(v_hat) + cfg_.eps) + cfg_.weight_decay * w[j]);
        }
        p.set_data(std::move(w));
    }
}

}  // namespace hoi
