#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hoi/tensor.hpp"

namespace hoi {

struct GradCheckEntry {
    std::string name;
    double max_rel_error = 0.0;
    bool pass = true;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_error = 0.0;
    bool all_pass = true;
};

// Central-difference check of backward() against numeric derivatives of f.
//
// f must rebuild its graph from the current leaf data on every call and return
// a scalar. While perturbing, stop_gradient outputs are frozen at their
// base-point values, so the numeric derivative measures exactly the function
// backward() differentiates: blocked paths contribute zero on both sides.
//
// Relative error per coordinate: |analytic - numeric| / max(|analytic|,
// |numeric|, 1e-12). Two classes of coordinate count as agreement before the
// relative test runs: both sides below 1e-7 in magnitude
// (structurally-cancelled derivatives leave only rounding residue), and
// absolute difference below 1e-7 (the difference quotient itself carries
// ~|f|*ulp/eps of rounding noise, so smaller disagreements are unmeasurable).
// A coordinate passes when the remaining error is <= tol. When
// max_coords_per_param > 0, a deterministic strided subset of coordinates is
// checked per parameter instead of every coordinate.
GradCheckReport finite_diff_check(const std::function<Tensor()>& f,
                                  const std::vector<NamedParam>& params, double eps, double tol,
                                  int max_coords_per_param = 0);

}  // namespace hoi
