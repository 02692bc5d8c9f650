#include "hoi/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "hoi/errors.hpp"

namespace hoi {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

int parse_int(const std::string& value, int line_no) {
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(value, &used);
    } catch (const std::exception&) {
        used = std::string::npos;
    }
    if (used != value.size() || value.empty()) {
        throw ParseError("config line " + std::to_string(line_no) + ": '" + value +
                         "' is not an integer");
    }
    return static_cast<int>(v);
}

uint64_t parse_u64(const std::string& value, int line_no) {
    std::size_t used = 0;
    uint64_t v = 0;
    try {
        v = std::stoull(value, &used);
    } catch (const std::exception&) {
        used = std::string::npos;
    }
    if (used != value.size() || value.empty()) {
        throw ParseError("config line " + std::to_string(line_no) + ": '" + value +
                         "' is not an unsigned integer");
    }
    return v;
}

double parse_double(const std::string& value, int line_no) {
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(value, &used);
    } catch (const std::exception&) {
        used = std::string::npos;
    }
    if (used != value.size() || value.empty()) {
        throw ParseError("config line " + std::to_string(line_no) + ": '" + value +
                         "' is not a number");
    }
    return v;
}

bool parse_bool(const std::string& value, int line_no) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ParseError("config line " + std::to_string(line_no) + ": '" + value +
                     "' is not a boolean (true/false/1/0)");
}

void require(bool ok, const std::string& message) {
    if (!ok) throw ConfigError("config: " + message);
}

}  // namespace

std::string link_mode_name(LinkMode mode) {
    switch (mode) {
        case LinkMode::human_guide: return "human_guide";
        case LinkMode::addition_guide: return "addition_guide";
        case LinkMode::random_guide: return "random_guide";
        case LinkMode::object_guide: return "object_guide";
    }
    throw ConfigError("link_mode_name: invalid enum value");
}

LinkMode link_mode_from_name(const std::string& name) {
    if (name == "human_guide") return LinkMode::human_guide;
    if (name == "addition_guide") return LinkMode::addition_guide;
    if (name == "random_guide") return LinkMode::random_guide;
    if (name == "object_guide") return LinkMode::object_guide;
    throw ConfigError("unknown link_mode '" + name +
                      "' (expected human_guide|addition_guide|random_guide|object_guide)");
}

void validate_config(const RunConfig& c) {
    require(c.d > 0, "d must be positive");
    require(c.heads > 0, "heads must be positive");
    require(c.d % c.heads == 0, "d (" + std::to_string(c.d) + ") must be divisible by heads (" +
                                    std::to_string(c.heads) + ")");
    // The 2-D positional encoding splits d into sin/cos pairs per axis.
    require(c.d % 4 == 0, "d must be divisible by 4");
    require(c.encoder_layers >= 1, "encoder_layers must be >= 1");
    require(c.decoder_layers >= 1, "decoder_layers must be >= 1");
    require(c.n_queries >= 1, "n_queries must be >= 1");
    require(c.k_obj >= 1, "k_obj must be >= 1");
    require(c.k_act >= 1, "k_act must be >= 1");
    // Two indicator channels plus at least two signature channels.
    require(c.channels >= 4, "channels must be >= 4");
    require(c.grid_h >= 4 && c.grid_w >= 4, "grid must be at least 4x4");
    require(c.lambda_reg >= 0 && c.lambda_giou >= 0 && c.lambda_obj >= 0 && c.lambda_act >= 0,
            "loss weights must be nonnegative");
    require(c.lr > 0, "lr must be positive");
    require(c.weight_decay >= 0, "weight_decay must be nonnegative");
    require(c.epochs >= 0, "epochs must be nonnegative");
    require(c.batch_size >= 1, "batch_size must be >= 1");
    require(c.nms_threshold > 0 && c.nms_threshold <= 1, "nms_threshold must be in (0,1]");
    require(c.iou_threshold > 0 && c.iou_threshold < 1, "iou_threshold must be in (0,1)");
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    const std::map<std::string, std::function<void(const std::string&, int)>> setters = {
        {"d", [&](const std::string& v, int n) { cfg.d = parse_int(v, n); }},
        {"heads", [&](const std::string& v, int n) { cfg.heads = parse_int(v, n); }},
        {"encoder_layers",
         [&](const std::string& v, int n) { cfg.encoder_layers = parse_int(v, n); }},
        {"decoder_layers",
         [&](const std::string& v, int n) { cfg.decoder_layers = parse_int(v, n); }},
        {"n_queries", [&](const std::string& v, int n) { cfg.n_queries = parse_int(v, n); }},
        {"k_obj", [&](const std::string& v, int n) { cfg.k_obj = parse_int(v, n); }},
        {"k_act", [&](const std::string& v, int n) { cfg.k_act = parse_int(v, n); }},
        {"channels", [&](const std::string& v, int n) { cfg.channels = parse_int(v, n); }},
        {"grid_h", [&](const std::string& v, int n) { cfg.grid_h = parse_int(v, n); }},
        {"grid_w", [&](const std::string& v, int n) { cfg.grid_w = parse_int(v, n); }},
        {"lambda_reg", [&](const std::string& v, int n) { cfg.lambda_reg = parse_double(v, n); }},
        {"lambda_giou",
         [&](const std::string& v, int n) { cfg.lambda_giou = parse_double(v, n); }},
        {"lambda_obj", [&](const std::string& v, int n) { cfg.lambda_obj = parse_double(v, n); }},
        {"lambda_act", [&](const std::string& v, int n) { cfg.lambda_act = parse_double(v, n); }},
        {"lr", [&](const std::string& v, int n) { cfg.lr = parse_double(v, n); }},
        {"weight_decay",
         [&](const std::string& v, int n) { cfg.weight_decay = parse_double(v, n); }},
        {"epochs", [&](const std::string& v, int n) { cfg.epochs = parse_int(v, n); }},
        {"batch_size", [&](const std::string& v, int n) { cfg.batch_size = parse_int(v, n); }},
        {"seed", [&](const std::string& v, int n) { cfg.seed = parse_u64(v, n); }},
        {"link_mode",
         [&](const std::string& v, int) { cfg.link_mode = link_mode_from_name(v); }},
        {"sg_enabled", [&](const std::string& v, int n) { cfg.sg_enabled = parse_bool(v, n); }},
        {"nms_threshold",
         [&](const std::string& v, int n) { cfg.nms_threshold = parse_double(v, n); }},
        {"iou_threshold",
         [&](const std::string& v, int n) { cfg.iou_threshold = parse_double(v, n); }},
    };
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ParseError("config line " + std::to_string(line_no) + ": expected key=value, got '" +
                             line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        auto it = setters.find(key);
        if (it == setters.end()) {
            throw ParseError("config line " + std::to_string(line_no) + ": unknown key '" + key +
                             "'");
        }
        it->second(value, line_no);
    }
    validate_config(cfg);
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

std::string config_to_string(const RunConfig& c) {
    std::ostringstream out;
    out << "d=" << c.d << "\n";
    out << "heads=" << c.heads << "\n";
    out << "encoder_layers=" << c.encoder_layers << "\n";
    out << "decoder_layers=" << c.decoder_layers << "\n";
    out << "n_queries=" << c.n_queries << "\n";
    out << "k_obj=" << c.k_obj << "\n";
    out << "k_act=" << c.k_act << "\n";
    out << "channels=" << c.channels << "\n";
    out << "grid_h=" << c.grid_h << "\n";
    out << "grid_w=" << c.grid_w << "\n";
    out << "lambda_reg=" << fmt_double(c.lambda_reg) << "\n";
    out << "lambda_giou=" << fmt_double(c.lambda_giou) << "\n";
    out << "lambda_obj=" << fmt_double(c.lambda_obj) << "\n";
    out << "lambda_act=" << fmt_double(c.lambda_act) << "\n";
    out << "lr=" << fmt_double(c.lr) << "\n";
    out << "weight_decay=" << fmt_double(c.weight_decay) << "\n";
    out << "epochs=" << c.epochs << "\n";
    out << "batch_size=" << c.batch_size << "\n";
    out << "seed=" << c.seed << "\n";
    out << "link_mode=" << link_mode_name(c.link_mode) << "\n";
    out << "sg_enabled=" << (c.sg_enabled ? "true" : "false") << "\n";
    out << "nms_threshold=" << fmt_double(c.nms_threshold) << "\n";
    out << "iou_threshold=" << fmt_double(c.iou_threshold) << "\n";
    return out.str();
}

void save_config(const RunConfig& cfg, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write config file '" + path + "'");
    out << config_to_string(cfg);
}

}  // namespace hoi
