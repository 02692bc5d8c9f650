#include "hoi/cli.hpp"

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "hoi/checkpoint.hpp"
#include "hoi/config.hpp"
#include "hoi/data.hpp"
#include "hoi/errors.hpp"
#include "hoi/eval.hpp"
#include "hoi/gradcheck.hpp"
#include "hoi/losses.hpp"
#include "hoi/matching.hpp"
#include "hoi/model.hpp"
#include "hoi/rng.hpp"
#include "hoi/train.hpp"

namespace hoi {

namespace {

// 17 significant digits survive a text round-trip of any binary64 value.
std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_triplet_dump(const std::vector<ScoredTriplet>& preds, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw ParameterError("dump: cannot open for writing: " + path);
    os << "scene_id\thx1\thy1\thx2\thy2\tox1\toy1\tox2\toy2\tobject_class\taction\tscore\n";
    for (const auto& t : preds) {
        os << t.scene_id;
        for (const double v : t.human_box) os << '\t' << g17(v);
        for (const double v : t.object_box) os << '\t' << g17(v);
        os << '\t' << t.object_class << '\t' << t.action << '\t' << g17(t.score) << '\n';
    }
}

EvalReport evaluate_params(const std::vector<SceneSample>& data, const ModelParams& params,
                           const RunConfig& cfg, std::vector<ScoredTriplet>* preds_out = nullptr) {
    std::vector<ScoredTriplet> preds = predict_dataset(data, params, cfg);
    EvalReport rep = role_map(preds, data, cfg.iou_threshold);
    if (preds_out) *preds_out = std::move(preds);
    return rep;
}

void print_report(const EvalReport& rep, std::ostream& out) {
    out << "metric\tvalue\n";
    out << "role_map\t" << g17(rep.mean_ap) << '\n';
    out << "categories\t" << rep.evaluated_categories << '\n';
    for (const auto& [action, ap] : rep.per_category_ap)
        out << "ap_action_" << action << '\t' << g17(ap) << '\n';
    out << "human_recall\t" << g17(rep.humans.recall) << '\n';
    out << "human_precision\t" << g17(rep.humans.precision) << '\n';
    out << "human_map\t" << g17(rep.humans.map) << '\n';
    out << "object_recall\t" << g17(rep.objects.recall) << '\n';
    out << "object_precision\t" << g17(rep.objects.precision) << '\n';
    out << "object_map\t" << g17(rep.objects.map) << '\n';
}

// One finite-difference pass over every trainable parameter of the full
// model + matched loss. The assignment is pinned at the base point so the
// function under test stays smooth.
GradCheckReport model_loss_gradcheck(const RunConfig& cfg, uint64_t seed, int max_coords) {
    const SceneSample scene = generate_scene(seed, cfg);
    Rng rng(seed);
    ModelParams params = make_model_params(cfg, rng);
    const ForwardResult base = model_forward(scene, params, cfg.link_mode, cfg.sg_enabled);
    const MatchAssignment match =
        hungarian_match(build_cost_matrix(base.predictions, scene.triplets, cfg));
    const auto f = [&]() {
        const ForwardResult r = model_forward(scene, params, cfg.link_mode, cfg.sg_enabled);
        return compute_losses(r, scene.triplets, match, cfg).total;
    };
    return finite_diff_check(f, named_parameters(params), 1e-5, 1e-4, max_coords);
}

RunConfig shrink_for_full_coverage(RunConfig cfg) {
    cfg.d = 8;
    cfg.heads = 2;
    cfg.encoder_layers = 1;
    cfg.decoder_layers = 1;
    cfg.n_queries = 2;
    cfg.k_obj = 2;
    cfg.k_act = 2;
    cfg.channels = 4;
    cfg.grid_h = 4;
    cfg.grid_w = 4;
    return cfg;
}

int do_train(const std::string& cfg_path, const std::string& data_path, const std::string& out_dir,
             const uint64_t* seed, std::ostream& out) {
    RunConfig cfg = load_config(cfg_path);
    if (seed) cfg.seed = *seed;
    const std::vector<SceneSample> data = load_dataset(data_path);

    std::filesystem::create_directories(out_dir);
    save_config(cfg, out_dir + "/config.txt");
    std::ofstream metrics(out_dir + "/metrics.tsv");
    if (!metrics) throw ParameterError("train: cannot open metrics log in " + out_dir);
    metrics << "step\tl_loc_h\tl_loc_o\tl_o\tl_a\ttotal\n";

    const TrainResult result = train_loop(data, cfg, &metrics);
    metrics.close();
    save_checkpoint(result.params, out_dir + "/checkpoint.bin");

    out << "steps\tfinal_total\n";
    out << result.steps << '\t' << g17(result.final_total) << '\n';
    return 0;
}

int do_eval(const std::string& cfg_path, const std::string& data_path, const std::string& ckpt,
            const std::string& dump, std::ostream& out) {
    const RunConfig cfg = load_config(cfg_path);
    const std::vector<SceneSample> data = load_dataset(data_path);
    const ModelParams params = load_checkpoint(ckpt, cfg);
    std::vector<ScoredTriplet> preds;
    const EvalReport rep = evaluate_params(data, params, cfg, &preds);
    print_report(rep, out);
    if (!dump.empty()) write_triplet_dump(preds, dump);
    return 0;
}

int do_gradcheck(const std::string& cfg_path, const uint64_t* seed, std::ostream& out) {
    const RunConfig cfg = load_config(cfg_path);
    const uint64_t s = seed ? *seed : cfg.seed;

    struct Phase {
        const char* label;
        RunConfig cfg;
        int max_coords;
    };
    RunConfig tiny_h = shrink_for_full_coverage(cfg);
    tiny_h.link_mode = LinkMode::human_guide;
    RunConfig tiny_r = shrink_for_full_coverage(cfg);
    tiny_r.link_mode = LinkMode::random_guide;
    const std::array<Phase, 3> phases = {{
        {"full_small", tiny_h, 0},   // every coordinate, human-guide path
        {"full_small", tiny_r, 0},   // every coordinate, random-guide path
        {"strided_given", cfg, 3},   // spot coverage at the loaded config
    }};

    out << "phase\tlink_mode\tparams\tmax_rel_error\tstatus\n";
    bool all_pass = true;
    for (const auto& phase : phases) {
        const GradCheckReport rep = model_loss_gradcheck(phase.cfg, s, phase.max_coords);
        all_pass = all_pass && rep.all_pass;
        out << phase.label << '\t' << link_mode_name(phase.cfg.link_mode) << '\t'
            << rep.entries.size() << '\t' << g17(rep.max_rel_error) << '\t'
            << (rep.all_pass ? "pass" : "FAIL") << '\n';
    }
    return all_pass ? 0 : 1;
}

int do_probe(const std::string& cfg_path, const std::string& data_path, const std::string& ckpt,
             const std::string& target, const std::string& probs_csv, const uint64_t* seed,
             std::ostream& out) {
    const RunConfig cfg = load_config(cfg_path);
    const std::vector<SceneSample> data = load_dataset(data_path);
    const ModelParams params = load_checkpoint(ckpt, cfg);
    const MaskTarget mt = (target == "human") ? MaskTarget::humans : MaskTarget::objects;
    const uint64_t s = seed ? *seed : cfg.seed;

    std::vector<double> probs;
    std::string token;
    std::istringstream ps(probs_csv);
    while (std::getline(ps, token, ',')) {
        size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(token, &used);
        } catch (const std::exception&) {
            throw ParameterError("probe: not a probability: '" + token + "'");
        }
        if (used != token.size()) throw ParameterError("probe: not a probability: '" + token + "'");
        probs.push_back(v);  // range checked inside masking_probe
    }
    if (probs.empty()) throw ParameterError("probe: --probs list is empty");

    out << "target\tprob\tmasked_cells\trole_map\n";
    for (const double p : probs) {
        const MaskProbeResult r = masking_probe(data, params, cfg, mt, p, s);
        out << target << '\t' << g17(p) << '\t' << r.masked_cells << '\t' << g17(r.mean_ap)
            << '\n';
    }
    return 0;
}

int do_ablate(const std::string& cfg_path, const std::string& data_path,
              const std::string& out_dir, std::ostream& out) {
    const RunConfig base = load_config(cfg_path);
    const std::vector<SceneSample> data = load_dataset(data_path);
    std::filesystem::create_directories(out_dir);

    // every linking variant with the gradient block on, plus the block
    // ablation for the two guide-sided variants
    const std::array<std::pair<LinkMode, bool>, 6> variants = {{
        {LinkMode::human_guide, true},
        {LinkMode::addition_guide, true},
        {LinkMode::random_guide, true},
        {LinkMode::object_guide, true},
        {LinkMode::human_guide, false},
        {LinkMode::object_guide, false},
    }};

    std::string table = "link_mode\tsg\tsteps\tfinal_total\trole_map\n";
    for (const auto& [mode, sg] : variants) {
        RunConfig cfg = base;
        cfg.link_mode = mode;
        cfg.sg_enabled = sg;
        const std::string tag = link_mode_name(mode) + (sg ? "_sg" : "_nosg");
        std::ofstream metrics(out_dir + "/" + tag + ".tsv");
        if (!metrics) throw ParameterError("ablate: cannot open metrics log in " + out_dir);
        metrics << "step\tl_loc_h\tl_loc_o\tl_o\tl_a\ttotal\n";
        const TrainResult r = train_loop(data, cfg, &metrics);
        metrics.close();
        const EvalReport rep = evaluate_params(data, r.params, cfg);
        table += link_mode_name(mode);
        table += '\t';
        table += (sg ? "on" : "off");
        table += '\t';
        table += std::to_string(r.steps);
        table += '\t';
        table += g17(r.final_total);
        table += '\t';
        table += g17(rep.mean_ap);
        table += '\n';
    }

    std::ofstream tf(out_dir + "/ablation.tsv");
    if (!tf) throw ParameterError("ablate: cannot open table in " + out_dir);
    tf << table;
    out << table;
    return 0;
}

int do_gen(const std::string& cfg_path, int count, uint64_t seed, const std::string& out_path,
           std::ostream& out) {
    const RunConfig cfg = load_config(cfg_path);
    const std::vector<SceneSample> data = generate_dataset(seed, count, cfg);
    save_dataset(data, out_path);
    out << "scenes\tpath\n";
    out << data.size() << '\t' << out_path << '\n';
    return 0;
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"human-object interaction detector"};
    app.require_subcommand(1);

    std::string cfg_path, data_path, out_dir, ckpt, dump, target, probs, out_path;
    uint64_t seed = 0;
    int count = 0;

    auto* train_cmd = app.add_subcommand("train", "train a model and save the checkpoint");
    train_cmd->add_option("--config", cfg_path)->required();
    train_cmd->add_option("--data", data_path)->required();
    train_cmd->add_option("--out", out_dir)->required();
    auto* train_seed = train_cmd->add_option("--seed", seed);

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    eval_cmd->add_option("--config", cfg_path)->required();
    eval_cmd->add_option("--data", data_path)->required();
    eval_cmd->add_option("--checkpoint", ckpt)->required();
    eval_cmd->add_option("--dump", dump);

    auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of the full model");
    grad_cmd->add_option("--config", cfg_path)->required();
    auto* grad_seed = grad_cmd->add_option("--seed", seed);

    auto* probe_cmd = app.add_subcommand("probe", "mask grid cells and measure the mAP drop");
    probe_cmd->add_option("--config", cfg_path)->required();
    probe_cmd->add_option("--data", data_path)->required();
    probe_cmd->add_option("--checkpoint", ckpt)->required();
    probe_cmd->add_option("--target", target)
        ->required()
        ->check(CLI::IsMember({"human", "object"}));
    probe_cmd->add_option("--probs", probs)->required();
    auto* probe_seed = probe_cmd->add_option("--seed", seed);

    auto* ablate_cmd = app.add_subcommand("ablate", "train every linking/gradient variant");
    ablate_cmd->add_option("--config", cfg_path)->required();
    ablate_cmd->add_option("--data", data_path)->required();
    ablate_cmd->add_option("--out", out_dir)->required();

    auto* gen_cmd = app.add_subcommand("gen", "write a synthetic dataset");
    gen_cmd->add_option("--config", cfg_path)->required();
    gen_cmd->add_option("--count", count)->required()->check(CLI::NonNegativeNumber);
    gen_cmd->add_option("--seed", seed)->required();
    gen_cmd->add_option("--out", out_path)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n' << app.help();
        return 2;
    }

    try {
        if (train_cmd->parsed())
            return do_train(cfg_path, data_path, out_dir, train_seed->count() ? &seed : nullptr,
                            out);
        if (eval_cmd->parsed()) return do_eval(cfg_path, data_path, ckpt, dump, out);
        if (grad_cmd->parsed())
            return do_gradcheck(cfg_path, grad_seed->count() ? &seed : nullptr, out);
        if (probe_cmd->parsed())
            return do_probe(cfg_path, data_path, ckpt, target, probs,
                            probe_seed->count() ? &seed : nullptr, out);
        if (ablate_cmd->parsed()) return do_ablate(cfg_path, data_path, out_dir, out);
        if (gen_cmd->parsed()) return do_gen(cfg_path, count, seed, out_path, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    err << "usage error: no subcommand\n" << app.help();
    return 2;
}

}  // namespace hoi
