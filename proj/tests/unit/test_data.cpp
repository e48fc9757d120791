#include <doctest.h>

#include <cmath>
#include <cstring>
#include <sstream>

#include "aecnn/checkpoint.hpp"
#include "aecnn/data.hpp"
#include "oracles.hpp"

using namespace aecnn;

namespace {

PointCloud parse_xyz(const std::string& text) {
    std::istringstream in(text);
    return read_xyz(in);
}

std::string to_xyz(const PointCloud& c) {
    std::ostringstream out;
    write_xyz(out, c);
    return out.str();
}

std::string to_bin(const Dataset& d) {
    std::ostringstream out;
    write_dataset(out, d);
    return out.str();
}

Dataset from_bin(const std::string& bytes) {
    std::istringstream in(bytes);
    return read_dataset(in);
}

bool same_bits(const std::vector<Point3>& a, const std::vector<Point3>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(Point3)) == 0;
}

void check_normalized(const PointCloud& c) {
    const Point3 m = centroid(c);
    CHECK(norm(m) < 1e-9);
    double r = 0.0;
    for (const auto& p : c.points) r = std::max(r, norm(p));
    CHECK(std::abs(r - 1.0) < 1e-9);
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("xyz reading") {
    const auto two = parse_xyz("0 0 0\n1 2 3\n");
    REQUIRE(two.size() == 2);
    CHECK(two.points[1] == Point3{1, 2, 3});
    CHECK_FALSE(two.class_label);
    CHECK_FALSE(two.part_labels);

    const auto labeled = parse_xyz("# class 3\n# a comment\n0 0 0 1\n\n1 1 1 0\n");
    CHECK(labeled.class_label == 3);
    REQUIRE(labeled.part_labels);
    CHECK(*labeled.part_labels == std::vector<int>{1, 0});

    auto position = [](const std::string& text) -> std::uint64_t {
        try {
            parse_xyz(text);
        } catch (const FormatError& e) {
            return e.position();
        }
        return 0;
    };
    CHECK(position("0 0 0\n1 1\n") == 2);
    CHECK(position("0 0 0 1\n1 1 1\n") == 2);
    CHECK(position("0 0 zero\n") == 1);
    CHECK(position("0 0 nan\n") == 1);
    CHECK(position("0 0 0 -1\n") == 1);
    CHECK_THROWS_AS(parse_xyz("# only a comment\n"), FormatError);
}

TEST_CASE("xyz round trip at printed precision") {
    Rng rng(1);
    PointCloud c;
    c.points = oracle::random_points(50, rng, 3.0);
    c.points.push_back({1e-300, -0.1, 123456789.125});
    c.class_label = 2;
    c.part_labels = std::vector<int>(51, 0);
    for (std::size_t i = 0; i < 51; i += 3) (*c.part_labels)[i] = 4;
    const auto back = parse_xyz(to_xyz(c));
    CHECK(same_bits(back.points, c.points));
    CHECK(back.class_label == c.class_label);
    CHECK(back.part_labels == c.part_labels);
    CHECK(to_xyz(back) == to_xyz(c));

    const auto path = std::filesystem::temp_directory_path() / "aecnn_unit.xyz";
    save_xyz(path, c);
    CHECK(same_bits(load_xyz(path).points, c.points));
    std::filesystem::remove(path);
    CHECK_THROWS(load_xyz(path));
}

TEST_CASE("AEDS1 round trip is bitwise") {
    Rng rng(2);
    Dataset one = synth_segmentation(1, 32, rng);
    one.samples.resize(1);
    const auto back = from_bin(to_bin(one));
    REQUIRE(back.size() == 1);
    CHECK(same_bits(back.samples[0].points, one.samples[0].points));
    CHECK(back.samples[0].part_labels == one.samples[0].part_labels);
    CHECK(back.class_names == one.class_names);
    CHECK(back.part_names == one.part_names);
    CHECK(back.split_tag == one.split_tag);

    Dataset mixed = synth_classification(2, 16, rng);
    mixed.samples[1].class_label.reset();
    const std::string bytes = to_bin(mixed);
    CHECK(to_bin(from_bin(bytes)) == bytes);
    CHECK_FALSE(from_bin(bytes).samples[1].class_label);
}

TEST_CASE("AEDS1 errors") {
    CHECK_THROWS_AS(to_bin(Dataset{}), std::invalid_argument);
    Rng rng(3);
    const std::string bytes = to_bin(synth_classification(1, 8, rng));
    std::string bad = bytes;
    bad[1] = 'X';
    try {
        from_bin(bad);
        FAIL("bad magic accepted");
    } catch (const FormatError& e) {
        CHECK(e.position() == 0);
    }
    for (std::size_t cut = 0; cut < bytes.size(); ++cut) CHECK_THROWS_AS(from_bin(bytes.substr(0, cut)), FormatError);
    CHECK_THROWS_AS(from_bin(bytes + '\0'), FormatError);

    Dataset invalid = synth_classification(1, 8, rng);
    invalid.samples[0].class_label = 9;
    CHECK_THROWS_AS(invalid.validate(), std::invalid_argument);
}

TEST_CASE("surface samplers") {
    Rng rng(4);
    for (const auto& p : shapes::sphere(500, rng)) CHECK(std::abs(norm(p) - 1.0) < 1e-12);
    for (const auto& p : shapes::cube(500, rng)) {
        const double m = std::max({std::abs(p.x), std::abs(p.y), std::abs(p.z)});
        CHECK(std::abs(m - 1.0) < 1e-12);
    }
    for (const auto& p : shapes::cylinder(500, rng)) {
        const double radial = std::hypot(p.x, p.z);
        const bool side = std::abs(radial - 0.5) < 1e-12 && std::abs(p.y) <= 1.0 + 1e-12;
        const bool cap = std::abs(std::abs(p.y) - 1.0) < 1e-12 && radial <= 0.5 + 1e-12;
        CHECK((side || cap));
    }
    for (const auto& p : shapes::torus(500, rng)) {
        const double ring = std::hypot(p.x, p.z) - 1.0;
        CHECK(std::abs(std::hypot(ring, p.y) - 0.35) < 1e-12);
    }
    // Area-uniform on the sphere: each hemisphere gets about half the points.
    std::size_t upper = 0;
    for (const auto& p : shapes::sphere(4000, rng)) upper += p.y > 0;
    CHECK(std::abs(static_cast<double>(upper) / 4000.0 - 0.5) < 0.03);
}

TEST_CASE("synthetic classification set") {
    Rng a(5), b(5);
    const auto d = synth_classification(6, 64, a);
    CHECK(d.size() == 24);
    CHECK(d.class_names.size() == 4);
    std::vector<int> counts(4, 0);
    for (const auto& c : d.samples) {
        REQUIRE(c.class_label);
        ++counts[static_cast<std::size_t>(*c.class_label)];
        CHECK(c.size() == 64);
        check_normalized(c);
    }
    CHECK(counts == std::vector<int>{6, 6, 6, 6});
    const auto again = synth_classification(6, 64, b);
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(same_bits(d.samples[i].points, again.samples[i].points));
    CHECK_THROWS_AS(synth_classification(1, 3, a), std::invalid_argument);
}

TEST_CASE("synthetic segmentation set") {
    Rng a(6), b(6);
    const PartBounds bounds{0.3, 0.45};
    const auto d = synth_segmentation(10, 100, a, bounds);
    CHECK(d.size() == 20);
    for (const auto& c : d.samples) {
        REQUIRE(c.part_labels);
        CHECK(c.part_labels->size() == c.size());
        const auto n0 = std::count(c.part_labels->begin(), c.part_labels->end(), 0);
        CHECK(n0 >= 30);
        CHECK(n0 <= 45);
        for (int l : *c.part_labels) CHECK((l == 0 || l == 1));
        check_normalized(c);
    }
    CHECK_NOTHROW(d.validate());
    const auto again = synth_segmentation(10, 100, b, bounds);
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(same_bits(d.samples[i].points, again.samples[i].points));
        CHECK(d.samples[i].part_labels == again.samples[i].part_labels);
    }
    CHECK_THROWS_AS(synth_segmentation(1, 100, a, {0.6, 0.4}), std::invalid_argument);
}

}  // TEST_SUITE
