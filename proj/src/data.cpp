#include "aecnn/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "aecnn/checkpoint.hpp"
#include "binary_io.hpp"

namespace aecnn {

void Dataset::validate() const {
    for (std::size_t s = 0; s < samples.size(); ++s) {
        const auto& c = samples[s];
        c.validate();
        const std::string where = "sample " + std::to_string(s);
        if (c.class_label) {
            if (*c.class_label < 0 || static_cast<std::size_t>(*c.class_label) >= class_names.size()) {
                throw std::invalid_argument(where + ": class label " + std::to_string(*c.class_label) +
                                            " outside " + std::to_string(class_names.size()) + " classes");
            }
        }
        if (c.part_labels) {
            for (int l : *c.part_labels) {
                if (l < 0 || static_cast<std::size_t>(l) >= part_names.size()) {
                    throw std::invalid_argument(where + ": part label " + std::to_string(l) + " outside " +
                                                std::to_string(part_names.size()) + " parts");
                }
            }
        }
    }
}

// ---- .xyz ----------------------------------------------------------------------------------

namespace {

std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        const std::size_t start = i;
        while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        if (i > start) out.push_back(s.substr(start, i - start));
    }
    return out;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
    const auto* end = s.data() + s.size();
    const auto r = std::from_chars(s.data(), end, out);
    return r.ec == std::errc{} && r.ptr == end;
}

}  // namespace

PointCloud read_xyz(std::istream& in) {
    PointCloud cloud;
    std::vector<int> labels;
    std::string line;
    std::uint64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view body = line;
        if (const auto hash = body.find('#'); hash != std::string_view::npos) {
            const auto comment = split_ws(body.substr(hash + 1));
            if (comment.size() == 2 && comment[0] == "class") {
                int label = 0;
                if (!parse_number(comment[1], label)) throw FormatError("xyz: bad class label", line_no);
                cloud.class_label = label;
            }
            body = body.substr(0, hash);
        }
        const auto fields = split_ws(body);
        if (fields.empty()) continue;
        if (fields.size() != 3 && fields.size() != 4) {
            throw FormatError("xyz: expected 3 or 4 fields, got " + std::to_string(fields.size()), line_no);
        }
        Point3 p;
        if (!parse_number(fields[0], p.x) || !parse_number(fields[1], p.y) || !parse_number(fields[2], p.z)) {
            throw FormatError("xyz: malformed coordinate", line_no);
        }
        if (!is_finite(p)) throw FormatError("xyz: non-finite coordinate", line_no);
        const bool labeled = fields.size() == 4;
        if (!cloud.points.empty() && labeled != !labels.empty()) {
            throw FormatError("xyz: part labels must be given for every point or none", line_no);
        }
        if (labeled) {
            int label = 0;
            if (!parse_number(fields[3], label) || label < 0) throw FormatError("xyz: malformed part label", line_no);
            labels.push_back(label);
        }
        cloud.points.push_back(p);
    }
    if (cloud.points.empty()) throw FormatError("xyz: no points", line_no);
    if (!labels.empty()) cloud.part_labels = std::move(labels);
    return cloud;
}

void write_xyz(std::ostream& out, const PointCloud& cloud) {
    cloud.validate();
    if (cloud.class_label) out << "# class " << *cloud.class_label << '\n';
    char buf[128];
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const auto& p = cloud.points[i];
        int n = std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g", p.x, p.y, p.z);
        out.write(buf, n);
        if (cloud.part_labels) out << ' ' << (*cloud.part_labels)[i];
        out << '\n';
    }
    if (!out) throw std::runtime_error("xyz: write failed");
}

PointCloud load_xyz(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return read_xyz(in);
}

void save_xyz(const std::filesystem::path& path, const PointCloud& cloud) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_xyz(out, cloud);
}

// ---- AEDS1 ---------------------------------------------------------------------------------

namespace {

constexpr std::uint32_t kNoClass = 0xFFFFFFFFu;

void write_names(BinaryWriter& w, const std::vector<std::string>& names) {
    w.u32(static_cast<std::uint32_t>(names.size()));
    for (const auto& n : names) w.str32(n);
}

std::vector<std::string> read_names(BinaryReader& r, const char* what) {
    const std::uint32_t n = r.u32(what);
    if (n > 65536) throw FormatError(std::string("dataset: implausible ") + what, r.position());
    std::vector<std::string> names;
    for (std::uint32_t i = 0; i < n; ++i) names.push_back(r.str32(what));
    return names;
}

}  // namespace

void write_dataset(std::ostream& out, const Dataset& dataset) {
    if (dataset.samples.empty()) throw std::invalid_argument("dataset: refusing to write an empty dataset");
    dataset.validate();
    if (dataset.part_names.size() > 256) throw std::invalid_argument("dataset: part labels must fit in a byte");
    BinaryWriter w(out);
    w.bytes(kDatasetMagic, 5);
    w.str32(dataset.split_tag);
    write_names(w, dataset.class_names);
    write_names(w, dataset.part_names);
    w.u64(dataset.samples.size());
    for (const auto& c : dataset.samples) {
        w.u32(c.class_label ? static_cast<std::uint32_t>(*c.class_label) : kNoClass);
        w.u64(c.size());
        std::vector<double> coords;
        coords.reserve(3 * c.size());
        for (const auto& p : c.points) coords.insert(coords.end(), {p.x, p.y, p.z});
        w.f64s(coords);
        w.u8(c.part_labels ? 1 : 0);
        if (c.part_labels) {
            std::vector<std::uint8_t> bytes(c.part_labels->begin(), c.part_labels->end());
            w.bytes(bytes.data(), bytes.size());
        }
    }
    if (!out) throw std::runtime_error("dataset: write failed");
}

Dataset read_dataset(std::istream& in) {
    BinaryReader r(in);
    char magic[5];
    r.bytes(magic, 5, "magic");
    if (std::memcmp(magic, kDatasetMagic, 5) != 0) throw FormatError("dataset: bad magic", 0);
    Dataset ds;
    ds.split_tag = r.str32("split tag");
    ds.class_names = read_names(r, "class names");
    ds.part_names = read_names(r, "part names");
    const std::uint64_t count = r.u64("sample count");
    if (count == 0) throw FormatError("dataset: no samples", r.position());
    for (std::uint64_t s = 0; s < count; ++s) {
        PointCloud c;
        const std::uint32_t cls = r.u32("class id");
        if (cls != kNoClass) c.class_label = static_cast<int>(cls);
        const std::uint64_t n = r.u64("point count");
        if (n == 0) throw FormatError("dataset: sample with no points", r.position());
        const auto coords = r.f64s(3 * n, "coordinates");
        c.points.resize(n);
        for (std::uint64_t i = 0; i < n; ++i) c.points[i] = {coords[3 * i], coords[3 * i + 1], coords[3 * i + 2]};
        const std::uint8_t has_labels = r.u8("label flag");
        if (has_labels > 1) throw FormatError("dataset: bad label flag", r.position() - 1);
        if (has_labels) {
            std::vector<std::uint8_t> bytes(n);
            r.bytes(bytes.data(), n, "part labels");
            c.part_labels = std::vector<int>(bytes.begin(), bytes.end());
        }
        ds.samples.push_back(std::move(c));
    }
    r.expect_end();
    try {
        ds.validate();
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("dataset: ") + e.what(), r.position());
    }
    return ds;
}

void save_dataset_bin(const std::filesystem::path& path, const Dataset& dataset) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_dataset(out, dataset);
}

Dataset load_dataset_bin(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open dataset " + path.string());
    return read_dataset(in);
}

// ---- synthetic shapes ----------------------------------------------------------------------

namespace shapes {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

Point3 disk_point(Rng& rng, double r_inner, double r_outer, double y) {
    // Area-uniform radius on an annulus.
    const double r = std::sqrt(uniform(rng, r_inner * r_inner, r_outer * r_outer));
    const double t = uniform(rng, 0.0, kTwoPi);
    return {r * std::cos(t), y, r * std::sin(t)};
}

Point3 tube_point(Rng& rng, double radius, double y_lo, double y_hi) {
    const double t = uniform(rng, 0.0, kTwoPi);
    return {radius * std::cos(t), uniform(rng, y_lo, y_hi), radius * std::sin(t)};
}

Point3 sphere_point(Rng& rng, double radius) {
    std::normal_distribution<double> nd;
    Point3 p;
    double n = 0.0;
    while (!(n > 1e-12)) {
        p = {nd(rng), nd(rng), nd(rng)};
        n = norm(p);
    }
    return p * (radius / n);
}

}  // namespace

std::vector<Point3> sphere(std::size_t n, Rng& rng, double radius) {
    std::vector<Point3> out(n);
    for (auto& p : out) p = sphere_point(rng, radius);
    return out;
}

std::vector<Point3> cube(std::size_t n, Rng& rng, double half_side) {
    std::uniform_int_distribution<int> face(0, 5);
    std::vector<Point3> out(n);
    for (auto& p : out) {
        const int f = face(rng);
        const double a = uniform(rng, -half_side, half_side);
        const double b = uniform(rng, -half_side, half_side);
        const double s = f % 2 == 0 ? half_side : -half_side;
        switch (f / 2) {
            case 0: p = {s, a, b}; break;
            case 1: p = {a, s, b}; break;
            default: p = {a, b, s}; break;
        }
    }
    return out;
}

std::vector<Point3> cylinder(std::size_t n, Rng& rng, double radius, double half_height) {
    const double lateral = 2.0 * half_height;  // area / (2πr)
    const double caps = radius;                 // area / (2πr)
    std::vector<Point3> out(n);
    for (auto& p : out) {
        const double u = uniform(rng, 0.0, lateral + caps);
        if (u < lateral) {
            p = tube_point(rng, radius, -half_height, half_height);
        } else {
            p = disk_point(rng, 0.0, radius, u < lateral + caps / 2 ? half_height : -half_height);
        }
    }
    return out;
}

std::vector<Point3> torus(std::size_t n, Rng& rng, double major, double minor) {
    std::vector<Point3> out(n);
    for (auto& p : out) {
        double phi = 0.0;
        // Rejection on the tube angle: the area element is proportional to major + minor cos(phi).
        do {
            phi = uniform(rng, 0.0, kTwoPi);
        } while (uniform(rng, 0.0, major + minor) > major + minor * std::cos(phi));
        const double theta = uniform(rng, 0.0, kTwoPi);
        const double ring = major + minor * std::cos(phi);
        p = {ring * std::cos(theta), minor * std::sin(phi), ring * std::sin(theta)};
    }
    return out;
}

}  // namespace shapes

namespace {

PointCloud finish(std::vector<Point3> points, std::optional<std::vector<int>> labels, int class_label, Rng& rng) {
    std::normal_distribution<double> jitter(0.0, kSynthJitter);
    for (auto& p : points) p += Point3{jitter(rng), jitter(rng), jitter(rng)};
    // Shuffle so point order carries no part information.
    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    PointCloud c;
    c.class_label = class_label;
    for (std::size_t i : order) c.points.push_back(points[i]);
    if (labels) {
        std::vector<int> shuffled;
        for (std::size_t i : order) shuffled.push_back((*labels)[i]);
        c.part_labels = std::move(shuffled);
    }
    return normalize(c);
}

void require_points(std::size_t n_points) {
    if (n_points < 4) throw std::invalid_argument("synthetic samples need at least 4 points");
}

}  // namespace

Dataset synth_classification(std::size_t n_per_class, std::size_t n_points, Rng& rng) {
    require_points(n_points);
    Dataset ds;
    ds.class_names = {"sphere", "cube", "cylinder", "torus"};
    ds.split_tag = "synthetic";
    for (int cls = 0; cls < 4; ++cls) {
        for (std::size_t s = 0; s < n_per_class; ++s) {
            std::vector<Point3> pts;
            switch (cls) {
                case 0: pts = shapes::sphere(n_points, rng); break;
                case 1: pts = shapes::cube(n_points, rng); break;
                case 2: pts = shapes::cylinder(n_points, rng); break;
                default: pts = shapes::torus(n_points, rng); break;
            }
            ds.samples.push_back(finish(std::move(pts), std::nullopt, cls, rng));
        }
    }
    return ds;
}

namespace {

std::pair<std::vector<Point3>, std::vector<int>> barbell(std::size_t n0, std::size_t n1, Rng& rng) {
    const double ball = shapes::uniform(rng, 0.35, 0.45);
    const double bar = shapes::uniform(rng, 0.1, 0.15);
    const double half = shapes::uniform(rng, 0.5, 0.7);
    std::vector<Point3> pts;
    std::vector<int> labels;
    for (std::size_t i = 0; i < n0; ++i) {
        const double side = i % 2 == 0 ? 1.0 : -1.0;
        pts.push_back(shapes::sphere_point(rng, ball) + Point3{0.0, side * (half + ball), 0.0});
        labels.push_back(0);
    }
    for (std::size_t i = 0; i < n1; ++i) {
        pts.push_back(shapes::tube_point(rng, bar, -half, half));
        labels.push_back(1);
    }
    return {pts, labels};
}

std::pair<std::vector<Point3>, std::vector<int>> mushroom(std::size_t n0, std::size_t n1, Rng& rng) {
    const double cap = shapes::uniform(rng, 0.8, 1.0);
    const double stem = shapes::uniform(rng, 0.15, 0.25);
    const double height = shapes::uniform(rng, 0.8, 1.1);
    std::vector<Point3> pts;
    std::vector<int> labels;
    // Dome area 2πR², underside π(R² − r²): split points in that ratio.
    const double dome = 2.0 * cap * cap;
    const double under = cap * cap - stem * stem;
    for (std::size_t i = 0; i < n0; ++i) {
        if (shapes::uniform(rng, 0.0, dome + under) < dome) {
            Point3 p = shapes::sphere_point(rng, cap);
            p.y = std::abs(p.y);
            pts.push_back(p);
        } else {
            pts.push_back(shapes::disk_point(rng, stem, cap, 0.0));
        }
        labels.push_back(0);
    }
    const double side = 2.0 * height;  // lateral / (πr)
    const double bottom = stem;         // base / (πr)
    for (std::size_t i = 0; i < n1; ++i) {
        if (shapes::uniform(rng, 0.0, side + bottom) < side) {
            pts.push_back(shapes::tube_point(rng, stem, -height, 0.0));
        } else {
            pts.push_back(shapes::disk_point(rng, 0.0, stem, -height));
        }
        labels.push_back(1);
    }
    return {pts, labels};
}

}  // namespace

Dataset synth_segmentation(std::size_t n_per_class, std::size_t n_points, Rng& rng, PartBounds bounds) {
    require_points(n_points);
    if (!(bounds.min_part0 > 0.0 && bounds.min_part0 <= bounds.max_part0 && bounds.max_part0 < 1.0)) {
        throw std::invalid_argument("part bounds must satisfy 0 < min <= max < 1");
    }
    Dataset ds;
    ds.class_names = {"barbell", "mushroom"};
    ds.part_names = {"part0", "part1"};
    ds.split_tag = "synthetic";
    const auto n = static_cast<double>(n_points);
    for (int cls = 0; cls < 2; ++cls) {
        for (std::size_t s = 0; s < n_per_class; ++s) {
            const double lo = std::ceil(bounds.min_part0 * n);
            const double hi = std::floor(bounds.max_part0 * n);
            double count = std::round(shapes::uniform(rng, bounds.min_part0, bounds.max_part0) * n);
            if (lo <= hi) count = std::clamp(count, lo, hi);
            const auto n0 = static_cast<std::size_t>(count);
            auto [pts, labels] = cls == 0 ? barbell(n0, n_points - n0, rng) : mushroom(n0, n_points - n0, rng);
            ds.samples.push_back(finish(std::move(pts), std::move(labels), cls, rng));
        }
    }
    return ds;
}

}  // namespace aecnn
