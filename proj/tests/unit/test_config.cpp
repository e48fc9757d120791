#include <doctest.h>

#include "aecnn/config.hpp"

using namespace aecnn;

namespace {

bool mentions(const ConfigError& e, const std::string& needle) {
    for (const auto& p : e.problems()) {
        if (p.find(needle) != std::string::npos) return true;
    }
    return false;
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("presets are valid") {
    CHECK(NetworkConfig::desk_default().validate().empty());
    CHECK(NetworkConfig::paper_scale().validate().empty());
    CHECK(NetworkConfig::segmentation_default().validate().empty());
    const auto desk = NetworkConfig::desk_default();
    CHECK(desk.n_points == 256);
    CHECK(desk.level_sizes() == std::vector<std::size_t>{128, 32, 8});
    CHECK(desk.level_widths() == std::vector<std::size_t>{128, 256, 512});
    CHECK(desk.sa_first.k == 48);
    const auto paper = NetworkConfig::paper_scale();
    CHECK(paper.n_points == 1024);
    CHECK(paper.level_sizes().front() == 512);
}

TEST_CASE("enum spellings round trip") {
    for (auto v : {AlignVariant::PlainEdgeConv, AlignVariant::AEConv1, AlignVariant::AEConv2, AlignVariant::AEConv3}) {
        CHECK(parse_variant(to_string(v)) == v);
    }
    for (auto s : {Setting::YY, Setting::YAR, Setting::ARAR}) CHECK(parse_setting(to_string(s)) == s);
    for (auto a : {AnchorStrategy::Mean, AnchorStrategy::MaxProjection}) CHECK(parse_anchor(to_string(a)) == a);
    CHECK(parse_search("BALL") == SearchMode::Ball);
    CHECK_THROWS_AS(parse_task("regression"), std::invalid_argument);
}

TEST_CASE("serialize then parse reproduces the configuration") {
    ExperimentConfig cfg;
    cfg.network = NetworkConfig::segmentation_default();
    cfg.network.normalization = true;
    cfg.network.sa_first.radius = 0.35;
    cfg.train.epochs = 7;
    cfg.train.seed = 0xFFFFFFFFFFull;
    cfg.train.setting = Setting::YAR;
    cfg.data.train_per_class = 11;
    const std::string text = serialize_config(cfg);
    const auto back = parse_config(text);
    CHECK(serialize_config(back) == text);
    CHECK(back.network.sa_first.radius == 0.35);
    CHECK(back.train.seed == 0xFFFFFFFFFFull);
    CHECK(back.network.fp_widths == cfg.network.fp_widths);
    CHECK(back.network.sa_next.size() == cfg.network.sa_next.size());
}

TEST_CASE("parse details") {
    const auto cfg = parse_config(R"(
# comment
[network]
variant = aeconv1   # trailing comment
[sa_next.0]
k = 8
widths = 32, 64
align_hidden = 16
[train]
epochs = 3
)");
    CHECK(cfg.network.variant == AlignVariant::AEConv1);
    REQUIRE(cfg.network.sa_next.size() == 1);
    CHECK(cfg.network.sa_next[0].widths == std::vector<std::size_t>{32, 64});
    CHECK(cfg.train.epochs == 3);
    CHECK(cfg.network.n_points == 256);
}

TEST_CASE("errors are collected with line numbers") {
    try {
        parse_config("[network]\nbogus = 1\n[train]\nepochs = zero\nlr = 1e-3\n");
        FAIL("accepted an unknown key");
    } catch (const ConfigError& e) {
        CHECK(e.problems().size() == 2);
        CHECK(mentions(e, "line 2"));
        CHECK(mentions(e, "network.bogus"));
        CHECK(mentions(e, "line 4"));
    }
    CHECK_THROWS_AS(parse_config("[sa_next.1]\nk = 3\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("orphan = 1\n"), ConfigError);
}

TEST_CASE("validation reports every problem") {
    NetworkConfig c;
    c.n_points = 0;
    c.sa_first.k = 0;
    c.n_classes = 0;
    const auto problems = c.validate();
    CHECK(problems.size() >= 3);
    CHECK_THROWS_AS(check(c), ConfigError);

    NetworkConfig seg = NetworkConfig::segmentation_default();
    seg.sa_first.n_ref = 128;
    CHECK_FALSE(seg.validate().empty());

    NetworkConfig ball;
    ball.sa_first.search = SearchMode::Ball;
    ball.sa_first.radius = -1.0;
    CHECK_FALSE(ball.validate().empty());
}

}  // TEST_SUITE
