#pragma once

#include <cstdint>
#include <string>

namespace hoi {

enum class LinkMode {
    human_guide,
    addition_guide,
    random_guide,
    object_guide,
};

std::string link_mode_name(LinkMode mode);
LinkMode link_mode_from_name(const std::string& name);

// Every knob a run needs. Defaults are the desk-scale setup: small enough to
// train on a single core in minutes, structured identically to the full-size
// model.
struct RunConfig {
    // model
    int d = 32;
    int heads = 2;
    int encoder_layers = 2;
    int decoder_layers = 2;
    int n_queries = 8;
    int k_obj = 4;
    int k_act = 4;
    int channels = 8;
    int grid_h = 8;
    int grid_w = 8;

    // loss weights
    double lambda_reg = 1.0;
    double lambda_giou = 2.5;
    double lambda_obj = 1.0;
    double lambda_act = 1.0;

    // optimization
    double lr = 1e-3;
    double weight_decay = 1e-4;
    int epochs = 250;
    int batch_size = 8;
    uint64_t seed = 0;

    // behavior
    LinkMode link_mode = LinkMode::human_guide;
    bool sg_enabled = true;

    // evaluation
    double nms_threshold = 0.7;
    double iou_threshold = 0.5;
};

// Throws ConfigError naming the offending field.
void validate_config(const RunConfig& cfg);

// Flat key=value lines; '#' starts a comment; unknown keys are rejected.
// Doubles print with 17 significant digits so a round-trip is bit-exact.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);
std::string config_to_string(const RunConfig& cfg);
void save_config(const RunConfig& cfg, const std::string& path);

}  // namespace hoi
