#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "aecnn/network.hpp"
#include "oracles.hpp"

using namespace aecnn;
using ad::Tensor;

namespace {

NetworkConfig small_classifier(AlignVariant variant = AlignVariant::AEConv3, bool normalization = false) {
    NetworkConfig c;
    c.n_points = 64;
    c.variant = variant;
    c.normalization = normalization;
    c.sa_first.n_ref = 32;
    c.sa_first.k = 8;
    c.sa_first.widths = {16, 16};
    c.sa_next = {{4, {16, 24}, {16}}, {4, {24, 32}, {24}}};
    c.head_hidden = {16};
    return c;
}

NetworkConfig small_segmenter(AlignVariant variant = AlignVariant::AEConv3) {
    NetworkConfig c = small_classifier(variant);
    c.task = Task::Segmentation;
    c.sa_first.n_ref = 64;
    c.n_classes = 2;
    c.n_parts = 3;
    c.fp_widths = {{24}, {16}};
    c.seg_head_hidden = {8};
    return c;
}

PointCloud random_cloud(std::size_t n, Rng& rng) {
    PointCloud c;
    c.points = oracle::random_points(n, rng);
    return normalize(c);
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    REQUIRE(a.size() == b.size());
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

double classify_deviation(const AecnnModel& model, Rng& rng, int clouds, int rotations) {
    double worst = 0.0;
    for (int c = 0; c < clouds; ++c) {
        const auto cloud = random_cloud(model.config().n_points, rng);
        const auto base = classify(cloud, model);
        for (int r = 0; r < rotations; ++r) {
            const auto rotated = classify(apply_rotation(cloud, sample_arbitrary_rotation(rng)), model);
            worst = std::max(worst, max_abs_diff(base.values(), rotated.values()));
        }
    }
    return worst;
}

}  // namespace

TEST_SUITE("network") {

TEST_CASE("pointnet kernel") {
    Rng rng(1);
    const Mlp h("h", {3, 8, 8}, {false, true}, rng);
    const auto one = Tensor::constant({1, 3}, {0.3, -0.2, 0.9});
    const auto direct = h.forward(one);
    CHECK(max_abs_diff(pointnet_kernel(one, h).values(), direct.values()) == 0.0);

    const auto rows = oracle::random_values(5 * 3, rng);
    std::vector<double> shuffled;
    for (std::size_t r : {4, 2, 0, 3, 1}) shuffled.insert(shuffled.end(), rows.begin() + r * 3, rows.begin() + r * 3 + 3);
    CHECK(max_abs_diff(pointnet_kernel(Tensor::constant({5, 3}, rows), h).values(),
                       pointnet_kernel(Tensor::constant({5, 3}, shuffled), h).values()) == 0.0);
    CHECK_THROWS_AS(pointnet_kernel(Tensor::zeros({2, 4}), h), std::invalid_argument);
}

TEST_CASE("sa_first with self neighborhoods yields one shared feature") {
    Rng rng(2);
    NetworkConfig c = small_classifier();
    c.n_points = 16;
    c.sa_first.n_ref = 16;
    c.sa_first.k = 1;
    const AecnnModel model(small_classifier(), 1);
    const auto out = sa_first(random_cloud(16, rng), c, model.sa_first);
    REQUIRE(out.size() == 16);
    CHECK(out.frames.size() == 16);
    const auto f = out.features;
    const auto zero = model.sa_first.h.forward(Tensor::constant({1, 3}, {0, 0, 0}));
    for (std::size_t r = 0; r < 16; ++r) {
        for (std::size_t col = 0; col < f.cols(); ++col) CHECK(f.at(r, col) == zero.at(0, col));
    }
}

TEST_CASE("sa_first features are rotation invariant") {
    Rng rng(3);
    const AecnnModel model(small_classifier(), 2);
    for (int trial = 0; trial < 5; ++trial) {
        const auto cloud = random_cloud(64, rng);
        const auto a = sa_first(cloud, model.config(), model.sa_first);
        const auto b = sa_first(apply_rotation(cloud, sample_arbitrary_rotation(rng)), model.config(), model.sa_first);
        CHECK(a.source_indices == b.source_indices);
        CHECK(max_abs_diff(a.features.values(), b.features.values()) < 1e-7);
    }
}

TEST_CASE("align_feature examples") {
    Rng rng(4);
    const auto x = Tensor::constant({4}, {0.5, -1.0, 2.0, 0.25});
    const auto r = sample_arbitrary_rotation(rng);
    const RirPoint t{0.1, 0.2, -0.3};
    const auto plain = make_align_weights("p", AlignVariant::PlainEdgeConv, 4, {8}, rng);
    CHECK(plain.phi.layers().empty());
    CHECK(max_abs_diff(align_feature(x, r, t, plain).values(), x.values()) == 0.0);
    // AEConv1 starts with φ producing the identity matrix.
    const auto a1 = make_align_weights("a1", AlignVariant::AEConv1, 4, {8}, rng);
    CHECK(max_abs_diff(align_feature(x, r, t, a1).values(), x.values()) == 0.0);
    const auto a3 = make_align_weights("a3", AlignVariant::AEConv3, 4, {8}, rng);
    CHECK(align_feature(x, r, t, a3).shape() == ad::Shape{4});
    CHECK(a3.phi.in_features() == 9 + 3 + 4);
    CHECK_THROWS_AS(align_feature(Tensor::zeros({3}), r, t, a3), std::invalid_argument);
}

TEST_CASE("aligned features depend only on relative geometry") {
    Rng rng(5);
    const std::size_t features = 6;
    const auto x = Tensor::constant({1, features}, oracle::random_values(features, rng));
    for (int trial = 0; trial < 20; ++trial) {
        const auto pts = oracle::random_points(12, rng);
        const Point3 origin{};
        const Lrf fi = compute_lrf(pts[0], std::span(pts).subspan(0, 6), origin, AnchorStrategy::Mean);
        const Lrf fj = compute_lrf(pts[6], std::span(pts).subspan(6, 6), origin, AnchorStrategy::Mean);
        const auto rot = sample_arbitrary_rotation(rng);
        std::vector<Point3> rp;
        for (const auto& p : pts) rp.push_back(rot.apply(p));
        const Lrf gi = compute_lrf(rp[0], std::span(rp).subspan(0, 6), origin, AnchorStrategy::Mean);
        const Lrf gj = compute_lrf(rp[6], std::span(rp).subspan(6, 6), origin, AnchorStrategy::Mean);
        EdgeGeometry before, after;
        before.push(fi, fj, pts[6]);
        after.push(gi, gj, rp[6]);
        for (auto v : {AlignVariant::AEConv1, AlignVariant::AEConv3}) {
            const auto w = make_align_weights("a", v, features, {8}, rng);
            CHECK(max_abs_diff(align_features(x, before, w).values(), align_features(x, after, w).values()) < 1e-9);
        }
    }
}

TEST_CASE("AEConv2 sees raw bases and is not rotation invariant") {
    // Its input includes both frames' global axes, which rotate with the cloud.
    Rng rng(6);
    const AecnnModel model(small_classifier(AlignVariant::AEConv2), 3);
    CHECK(classify_deviation(model, rng, 2, 3) > 1e-6);
}

TEST_CASE("aligned edge conv on a self-loop graph") {
    Rng rng(7);
    NetworkConfig c = small_classifier(AlignVariant::PlainEdgeConv);
    const AecnnModel model(c, 4);
    const auto prev = sa_first(random_cloud(64, rng), c, model.sa_first);
    NeighborGraph graph;
    graph.reference_indices = {0, 5, 9};
    graph.neighbor_lists = {{0, 0}, {5, 5}, {9, 9}};
    const auto out = aligned_edge_conv(prev, graph, model.sa_next[0]);
    const std::size_t f = prev.features.cols();
    for (std::size_t i = 0; i < 3; ++i) {
        const std::size_t r = graph.reference_indices[i];
        std::vector<double> row(2 * f, 0.0);
        for (std::size_t col = 0; col < f; ++col) row[col] = prev.features.at(r, col);
        const auto expected = model.sa_next[0].q.forward(Tensor::constant({1, 2 * f}, row));
        for (std::size_t col = 0; col < out.cols(); ++col) CHECK(out.at(i, col) == doctest::Approx(expected.at(0, col)).epsilon(1e-14));
    }
    graph.neighbor_lists[1] = {5};
    CHECK_THROWS_AS(aligned_edge_conv(prev, graph, model.sa_next[0]), std::invalid_argument);
}

TEST_CASE("plain edge conv matches its closed form on a random graph") {
    Rng rng(8);
    NetworkConfig c = small_classifier(AlignVariant::PlainEdgeConv);
    const AecnnModel model(c, 5);
    const auto prev = sa_first(random_cloud(64, rng), c, model.sa_first);
    NeighborGraph graph;
    graph.reference_indices = {3, 17};
    graph.neighbor_lists = {{3, 1, 30}, {17, 8, 2}};
    const auto out = aligned_edge_conv(prev, graph, model.sa_next[0]);
    const std::size_t f = prev.features.cols();
    for (std::size_t i = 0; i < 2; ++i) {
        const std::size_t r = graph.reference_indices[i];
        std::vector<double> best(out.cols(), -INFINITY);
        for (std::size_t j : graph.neighbor_lists[i]) {
            std::vector<double> row(2 * f);
            for (std::size_t col = 0; col < f; ++col) {
                row[col] = prev.features.at(r, col);
                row[f + col] = prev.features.at(j, col) - prev.features.at(r, col);
            }
            const auto y = model.sa_next[0].q.forward(Tensor::constant({1, 2 * f}, row));
            for (std::size_t col = 0; col < best.size(); ++col) best[col] = std::max(best[col], y.at(0, col));
        }
        for (std::size_t col = 0; col < best.size(); ++col) CHECK(out.at(i, col) == doctest::Approx(best[col]).epsilon(1e-14));
    }
}

TEST_CASE("sa_next keeps a quarter of the references") {
    Rng rng(9);
    const AecnnModel model(small_classifier(), 6);
    const auto first = sa_first(random_cloud(64, rng), model.config(), model.sa_first);
    const auto second = sa_next(first, model.config().sa_next[0], model.sa_next[0]);
    CHECK(second.size() == 8);
    CHECK(second.features.shape() == ad::Shape{8, 24});
    const auto third = sa_next(second, model.config().sa_next[1], model.sa_next[1]);
    CHECK(third.size() == 2);
    CHECK(third.features.shape() == ad::Shape{2, 32});
    for (std::size_t i = 0; i < second.size(); ++i) CHECK(second.ref_points[i] == first.ref_points[second.source_indices[i]]);

    SaOutput four;
    four.ref_points.assign(first.ref_points.begin(), first.ref_points.begin() + 4);
    four.frames.assign(first.frames.begin(), first.frames.begin() + 4);
    four.features = ad::gather_rows(first.features, std::vector<std::size_t>{0, 1, 2, 3});
    SaNextConfig k1 = model.config().sa_next[0];
    k1.k = 2;
    CHECK(sa_next(four, k1, model.sa_next[0]).size() == 1);

    SaOutput three = four;
    three.ref_points.pop_back();
    three.frames.pop_back();
    three.features = ad::gather_rows(first.features, std::vector<std::size_t>{0, 1, 2});
    CHECK_THROWS_AS(sa_next(three, k1, model.sa_next[0]), std::invalid_argument);
}

TEST_CASE("classify is rotation invariant for the aligned variants") {
    Rng rng(10);
    for (auto v : {AlignVariant::AEConv1, AlignVariant::AEConv3}) {
        for (bool norm : {false, true}) {
            const AecnnModel model(small_classifier(v, norm), 7);
            INFO(to_string(v) << " normalization " << norm);
            CHECK(classify_deviation(model, rng, 3, 4) < 1e-7);
        }
    }
    // With rotation-invariant inputs, the plain baseline is invariant too.
    const AecnnModel plain(small_classifier(AlignVariant::PlainEdgeConv), 7);
    CHECK(classify_deviation(plain, rng, 3, 4) < 1e-7);
}

TEST_CASE("absolute-coordinate inputs break invariance") {
    Rng rng(11);
    NetworkConfig c = small_classifier(AlignVariant::PlainEdgeConv);
    c.input = InputMode::Absolute;
    const AecnnModel model(c, 8);
    CHECK(classify_deviation(model, rng, 3, 3) > 1e-3);
}

TEST_CASE("classify is invariant to point order") {
    Rng rng(12);
    const AecnnModel model(small_classifier(), 9);
    for (int trial = 0; trial < 5; ++trial) {
        auto cloud = random_cloud(64, rng);
        const auto base = classify(cloud, model);
        for (double v : base.values()) CHECK(std::isfinite(v));
        std::shuffle(cloud.points.begin(), cloud.points.end(), rng);
        const auto shuffled = classify(cloud, model);
        CHECK(max_abs_diff(base.values(), shuffled.values()) == 0.0);
    }
}

TEST_CASE("regularizer and frame statistics") {
    Rng rng(13);
    const auto cloud = random_cloud(64, rng);
    ForwardStats s1, s3;
    (void)classify(cloud, AecnnModel(small_classifier(AlignVariant::AEConv1), 1), &s1);
    (void)classify(cloud, AecnnModel(small_classifier(AlignVariant::AEConv3), 1), &s3);
    REQUIRE(s1.regularizer.defined());
    // Identity-initialized transforms are orthogonal.
    CHECK(s1.regularizer.item() == doctest::Approx(0.0));
    CHECK_FALSE(s3.regularizer.defined());
    CHECK(s3.degenerate_frames == 0);
}

TEST_CASE("feature propagation examples") {
    Rng rng(14);
    const AecnnModel model(small_segmenter(), 10);
    const auto first = sa_first(random_cloud(64, rng), model.config(), model.sa_first);
    auto coarse = sa_next(first, model.config().sa_next[0], model.sa_next[0]);
    const std::size_t f = coarse.features.cols();

    // Equal coarse features and identity alignment interpolate to that feature.
    const auto plain = make_align_weights("p", AlignVariant::PlainEdgeConv, f, {}, rng);
    std::vector<double> same;
    const auto row = oracle::random_values(f, rng);
    for (std::size_t i = 0; i < coarse.size(); ++i) same.insert(same.end(), row.begin(), row.end());
    SaOutput flat = coarse;
    flat.features = Tensor::constant({coarse.size(), f}, same);
    const auto interp = interpolate_aligned(flat, first.ref_points, first.frames, plain, 3);
    CHECK(interp.shape() == ad::Shape{64, f});
    for (std::size_t r = 0; r < 64; ++r)
        for (std::size_t c = 0; c < f; ++c) CHECK(interp.at(r, c) == doctest::Approx(row[c]).epsilon(1e-12));

    // A fine point on a coarse reference takes that reference's aligned feature.
    const auto& align = model.propagate[1].align;
    const std::vector<Point3> at_ref{coarse.ref_points[2]};
    const std::vector<Lrf> at_frame{coarse.frames[2]};
    const auto got = interpolate_aligned(coarse, at_ref, at_frame, align, 3);
    EdgeGeometry self;
    self.push(coarse.frames[2], coarse.frames[2], coarse.ref_points[2]);
    const auto own = align_features(ad::gather_rows(coarse.features, std::vector<std::size_t>{2}), self, align);
    CHECK(max_abs_diff(got.values(), own.values()) < 1e-8);

    const auto out = feature_propagation(coarse, first.ref_points, first.frames, first.features, model.propagate[1], 3);
    CHECK(out.shape() == ad::Shape{64, 16});
    CHECK_THROWS_AS(feature_propagation(coarse, first.ref_points, first.frames, coarse.features, model.propagate[1], 3),
                    std::invalid_argument);
}

TEST_CASE("segment: shapes, invariance and point-order equivariance") {
    Rng rng(15);
    const AecnnModel model(small_segmenter(), 11);
    for (int trial = 0; trial < 3; ++trial) {
        auto cloud = random_cloud(64, rng);
        const auto base = segment(cloud, 1, model);
        CHECK(base.shape() == ad::Shape{64, 3});
        for (int r = 0; r < 3; ++r) {
            const auto rotated = segment(apply_rotation(cloud, sample_arbitrary_rotation(rng)), 1, model);
            CHECK(max_abs_diff(base.values(), rotated.values()) < 1e-7);
        }
        std::vector<std::size_t> perm(64);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        PointCloud shuffled = cloud;
        for (std::size_t i = 0; i < 64; ++i) shuffled.points[i] = cloud.points[perm[i]];
        const auto out = segment(shuffled, 1, model);
        for (std::size_t i = 0; i < 64; ++i)
            for (std::size_t c = 0; c < 3; ++c) CHECK(out.at(i, c) == base.at(perm[i], c));
    }
    const auto cloud = random_cloud(64, rng);
    CHECK(max_abs_diff(segment(cloud, 0, model).values(), segment(cloud, 1, model).values()) > 0.0);
}

TEST_CASE("parameter accounting") {
    const AecnnModel a1(NetworkConfig::desk_default(), 1);
    NetworkConfig c3 = NetworkConfig::desk_default();
    c3.variant = AlignVariant::AEConv3;
    NetworkConfig c1 = c3;
    c1.variant = AlignVariant::AEConv1;
    const auto n1 = parameter_count(AecnnModel(c1, 1).parameters());
    const auto n3 = parameter_count(AecnnModel(c3, 1).parameters());
    CHECK(n1 > n3);
    NetworkConfig cp = c3;
    cp.variant = AlignVariant::PlainEdgeConv;
    CHECK(parameter_count(AecnnModel(cp, 1).parameters()) < n3);

    // Hand count for the small classifier.
    const auto small = small_classifier();
    std::size_t expected = (3 * 16 + 16) + (16 * 16 + 16);             // sa_first.h
    expected += (28 * 16 + 16) + (16 * 16 + 16);                        // sa_next.0.align: 12 + 16 -> 16 -> 16
    expected += (35 * 16 + 16) + (16 * 24 + 24);                        // sa_next.0.q: 2*16 + 3 -> 16 -> 24
    expected += (36 * 24 + 24) + (24 * 24 + 24);                        // sa_next.1.align: 12 + 24 -> 24 -> 24
    expected += (51 * 24 + 24) + (24 * 32 + 32);                        // sa_next.1.q: 2*24 + 3 -> 24 -> 32
    expected += (32 * 16 + 16) + (16 * 4 + 4);                          // head
    CHECK(parameter_count(AecnnModel(small, 1).parameters()) == expected);
}

TEST_CASE("models are seed deterministic") {
    const auto a = AecnnModel(small_classifier(), 5).parameters();
    const auto b = AecnnModel(small_classifier(), 5).parameters();
    const auto c = AecnnModel(small_classifier(), 6).parameters();
    REQUIRE(a.size() == b.size());
    bool differs = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].name == b[i].name);
        CHECK(max_abs_diff(a[i].tensor.values(), b[i].tensor.values()) == 0.0);
        differs = differs || max_abs_diff(a[i].tensor.values(), c[i].tensor.values()) > 0.0;
    }
    CHECK(differs);
}

TEST_CASE("forward errors") {
    Rng rng(16);
    const AecnnModel classifier(small_classifier(), 1);
    const AecnnModel segmenter(small_segmenter(), 1);
    CHECK_THROWS_AS(classify(random_cloud(63, rng), classifier), std::invalid_argument);
    CHECK_THROWS_AS(classify(random_cloud(64, rng), segmenter), std::invalid_argument);
    CHECK_THROWS_AS(segment(random_cloud(64, rng), 0, classifier), std::invalid_argument);
    CHECK_THROWS_AS(segment(random_cloud(64, rng), 2, segmenter), std::invalid_argument);
    NetworkConfig bad = small_classifier();
    bad.sa_first.widths.clear();
    CHECK_THROWS_AS(AecnnModel(bad, 1), ConfigError);
}

TEST_CASE("flop counting") {
    Rng rng(17);
    const AecnnModel model(small_classifier(), 1);
    const auto cloud = random_cloud(64, rng);
    const auto flops = forward_flops(cloud, model);
    CHECK(flops > 0);
    CHECK(forward_flops(cloud, model) == flops);
    // The first block alone: 32 references x 8 neighbors through 3 -> 16 -> 16.
    ad::FlopScope scope;
    (void)sa_first(cloud, model.config(), model.sa_first);
    CHECK(scope.flops() == 2u * 32 * 8 * (3 * 16 + 16 * 16));
}

}  // TEST_SUITE
