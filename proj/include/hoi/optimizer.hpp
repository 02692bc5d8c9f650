#pragma once

#include <cstdint>
#include <vector>

#include "hoi/tensor.hpp"

namespace hoi {

struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
};

// Decoupled-weight-decay Adam with bias correction. Parameters are leaf
// tensors updated in place through set_data, iterated in registration order,
// so a fixed gradient sequence reproduces bit-identical trajectories.
class AdamW {
public:
    AdamW(std::vector<NamedParam> params, AdamWConfig cfg);

    // Applies one update. Parameters without a gradient entry use zero (they
    // still decay). Throws DimensionError when an entry's length disagrees
    // with its parameter.
    void step(const GradientMap& grads);

    int64_t step_count() const { return step_; }
    const AdamWConfig& config() const { return cfg_; }

private:
    std::vector<NamedParam> params_;
    AdamWConfig cfg_;
    std::vector<std::vector<double>> m_, v_;
    int64_t step_ = 0;
};

}  // namespace hoi
