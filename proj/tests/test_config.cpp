#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>

#include "doctest.h"
#include "hoi/config.hpp"
#include "hoi/errors.hpp"

using namespace hoi;

TEST_CASE("defaults validate") {
    RunConfig cfg;
    CHECK_NOTHROW(validate_config(cfg));
    CHECK(cfg.d == 32);
    CHECK(cfg.lambda_giou == 2.5);
    CHECK(cfg.nms_threshold == 0.7);
    CHECK(cfg.iou_threshold == 0.5);
    CHECK(cfg.link_mode == LinkMode::human_guide);
    CHECK(cfg.sg_enabled);
}

TEST_CASE("text round-trip is exact") {
    RunConfig cfg;
    cfg.d = 16;
    cfg.heads = 4;
    cfg.lr = 0.00123456789012345678;
    cfg.lambda_giou = 1.0 / 3.0;
    cfg.seed = 18446744073709551615ULL;
    cfg.link_mode = LinkMode::random_guide;
    cfg.sg_enabled = false;
    RunConfig back = parse_config_text(config_to_string(cfg));
    CHECK(back.d == cfg.d);
    CHECK(back.heads == cfg.heads);
    CHECK(back.lr == cfg.lr);
    CHECK(back.lambda_giou == cfg.lambda_giou);
    CHECK(back.seed == cfg.seed);
    CHECK(back.link_mode == cfg.link_mode);
    CHECK(back.sg_enabled == cfg.sg_enabled);
    CHECK(config_to_string(back) == config_to_string(cfg));
}

TEST_CASE("comments, blanks and spacing are tolerated") {
    RunConfig cfg = parse_config_text(
        "# a comment\n"
        "\n"
        "  d = 16   # trailing comment\n"
        "heads=4\n");
    CHECK(cfg.d == 16);
    CHECK(cfg.heads == 4);
}

TEST_CASE("unknown keys and malformed lines are rejected with line numbers") {
    CHECK_THROWS_WITH_AS(parse_config_text("bogus_key=1\n"),
                         doctest::Contains("line 1"), ParseError);
    CHECK_THROWS_WITH_AS(parse_config_text("d=16\nnot a pair\n"),
                         doctest::Contains("line 2"), ParseError);
    CHECK_THROWS_WITH_AS(parse_config_text("d=abc\n"), doctest::Contains("not an integer"),
                         ParseError);
    CHECK_THROWS_WITH_AS(parse_config_text("lr=fast\n"), doctest::Contains("not a number"),
                         ParseError);
    CHECK_THROWS_WITH_AS(parse_config_text("sg_enabled=maybe\n"),
                         doctest::Contains("not a boolean"), ParseError);
    CHECK_THROWS_AS(parse_config_text("link_mode=both_guide\n"), ConfigError);
}

TEST_CASE("validation names the failing constraint") {
    RunConfig cfg;
    cfg.heads = 5;
    CHECK_THROWS_WITH_AS(validate_config(cfg), doctest::Contains("divisible"), ConfigError);
    cfg = RunConfig{};
    cfg.encoder_layers = 0;
    CHECK_THROWS_AS(validate_config(cfg), ConfigError);
    cfg = RunConfig{};
    cfg.channels = 3;
    CHECK_THROWS_AS(validate_config(cfg), ConfigError);
    cfg = RunConfig{};
    cfg.nms_threshold = 0.0;
    CHECK_THROWS_AS(validate_config(cfg), ConfigError);
    cfg = RunConfig{};
    cfg.iou_threshold = 1.0;
    CHECK_THROWS_AS(validate_config(cfg), ConfigError);
    cfg = RunConfig{};
    cfg.lr = 0.0;
    CHECK_THROWS_AS(validate_config(cfg), ConfigError);
    cfg = RunConfig{};
    cfg.lambda_act = -0.1;
    CHECK_THROWS_AS(validate_config(cfg), ConfigError);
}

TEST_CASE("parsing an invalid combination fails at the validation step") {
    CHECK_THROWS_AS(parse_config_text("d=10\nheads=4\n"), ConfigError);
}

TEST_CASE("file round-trip") {
    RunConfig cfg;
    cfg.epochs = 7;
    const std::string path = "config_roundtrip.tmp";
    save_config(cfg, path);
    RunConfig back = load_config(path);
    CHECK(back.epochs == 7);
    CHECK(config_to_string(back) == config_to_string(cfg));
    std::remove(path.c_str());
    CHECK_THROWS_AS(load_config("does_not_exist.cfg"), ParseError);
}

TEST_CASE("link mode names round-trip") {
    for (LinkMode m : {LinkMode::human_guide, LinkMode::addition_guide, LinkMode::random_guide,
                       LinkMode::object_guide}) {
        CHECK(link_mode_from_name(link_mode_name(m)) == m);
    }
}
