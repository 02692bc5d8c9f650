#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hoi/config.hpp"
#include "hoi/tensor.hpp"

namespace hoi {

struct GroundTruthTriplet {
    std::array<double, 4> human_box{};   // cx, cy, w, h — normalized to [0,1]
    std::array<double, 4> object_box{};  // same
    int object_class = 0;                // in [0, K_obj)
    std::vector<bool> interaction_labels;  // K_act flags, at least one true
};

struct SceneSample {
    int scene_id = 0;
    Tensor feature_grid;  // [C, H, W]
    std::vector<GroundTruthTriplet> triplets;
};

// Grid cells whose centers fall strictly inside the (normalized, cxcywh) box,
// as (row, col) pairs in row-major order. Shared by the scene generator and
// the masking probe so "inside a box" means one thing everywhere.
std::vector<std::pair<int, int>> cells_inside_box(const std::array<double, 4>& cxcywh, int grid_h,
                                                  int grid_w);

// Deterministic synthetic scene: 1..min(4, n_queries) disjoint human/object
// box pairs, cell-aligned, each pair carrying an object class and >= 1
// action. The feature grid encodes a decodable signature:
//   ch 0: 1 + pair_key on human cells      (pair_key = (pair_index+1)/5)
//   ch 1: 1 + pair_key on object cells
//   ch 2 + (a % (C-2)):          1 on human cells, per true action a
//   ch 2 + ((K_act+c) % (C-2)):  1 on object cells, for object class c
// Background cells hold uniform noise in [-0.05, 0.05]; in-box cells carry
// exactly the signature.
SceneSample generate_scene(uint64_t seed, const RunConfig& cfg);

// count scenes with scene_id 0..count-1, each from a seed derived via
// splitmix64 so scenes are independent of each other and of count.
std::vector<SceneSample> generate_dataset(uint64_t seed, int count, const RunConfig& cfg);

// Line-delimited text, one scene per line, floats at 17 significant digits;
// load(save(x)) is bit-exact. Parse errors name the offending line.
void save_dataset(const std::vector<SceneSample>& scenes, const std::string& path);
std::vector<SceneSample> load_dataset(const std::string& path);

}  // namespace hoi
