#include "aecnn/geometry.hpp"

#include <algorithm>
#include <numbers>
#include <numeric>
#include <string>

namespace aecnn {

double Mat3::max_abs_diff(const Mat3& other) const {
    double worst = 0.0;
    for (std::size_t i = 0; i < 9; ++i) worst = std::max(worst, std::abs(v_[i] - other.v_[i]));
    return worst;
}

RotationMatrix RotationMatrix::checked(const Mat3& m, double tolerance) {
    RotationMatrix r(m);
    if (!(r.orthonormality_error() <= tolerance)) {
        throw std::invalid_argument("matrix is not a proper rotation (error " +
                                    std::to_string(r.orthonormality_error()) + ")");
    }
    return r;
}

double RotationMatrix::orthonormality_error() const {
    const double gram = (m_ * m_.transposed()).max_abs_diff(Mat3::identity());
    return std::max(gram, std::abs(m_.determinant() - 1.0));
}

void PointCloud::validate() const {
    if (points.empty()) throw std::invalid_argument("point cloud is empty");
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (!is_finite(points[i])) throw std::invalid_argument("point " + std::to_string(i) + " is not finite");
    }
    if (part_labels && part_labels->size() != points.size()) {
        throw std::invalid_argument("part label count " + std::to_string(part_labels->size()) +
                                    " does not match point count " + std::to_string(points.size()));
    }
}

Point3 centroid(std::span<const Point3> points) {
    if (points.empty()) throw std::invalid_argument("centroid of an empty point set");
    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return lexicographic_less(points[a], points[b]); });
    Point3 sum{};
    for (std::size_t i : order) sum += points[i];
    return sum * (1.0 / static_cast<double>(points.size()));
}

Point3 centroid(const PointCloud& cloud) { return centroid(std::span<const Point3>(cloud.points)); }

PointCloud recenter(const PointCloud& cloud) {
    const Point3 c = centroid(cloud);
    PointCloud out = cloud;
    for (auto& p : out.points) p -= c;
    return out;
}

PointCloud normalize(const PointCloud& cloud) {
    PointCloud out = recenter(cloud);
    double max_sq = 0.0;
    for (const auto& p : out.points) max_sq = std::max(max_sq, squared_norm(p));
    const double radius = std::sqrt(max_sq);
    if (!(radius > 0.0)) throw std::invalid_argument("cannot normalize a degenerate cloud (all points coincide)");
    for (auto& p : out.points) p *= 1.0 / radius;
    return out;
}

RotationMatrix rodrigues(const Point3& axis, double angle) {
    if (std::abs(norm(axis) - 1.0) > 1e-9) throw std::invalid_argument("rotation axis must have unit length");
    // K is the cross-product matrix of the axis: K v = axis x v.
    const Mat3 k({0.0, -axis.z, axis.y, axis.z, 0.0, -axis.x, -axis.y, axis.x, 0.0});
    const Mat3 k2 = k * k;
    const double s = std::sin(angle);
    const double c = 1.0 - std::cos(angle);
    Mat3 r = Mat3::identity();
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) r(i, j) += s * k(i, j) + c * k2(i, j);
    return RotationMatrix::unchecked(r);
}

RotationMatrix sample_arbitrary_rotation(Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    Point3 v;
    double n = 0.0;
    do {
        v = {normal(rng), normal(rng), normal(rng)};
        n = norm(v);
    } while (!(n > 1e-12));
    return rodrigues(v * (1.0 / n), angle(rng));
}

RotationMatrix sample_y_rotation(Rng& rng) {
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    return rodrigues({0.0, 1.0, 0.0}, angle(rng));
}

PointCloud apply_rotation(const PointCloud& cloud, const RotationMatrix& r) {
    PointCloud out = cloud;
    for (auto& p : out.points) p = r.apply(p);
    return out;
}

ScaleTranslate ScaleTranslate::sample(Rng& rng) {
    std::uniform_real_distribution<double> scale(kMinScale, kMaxScale);
    std::uniform_real_distribution<double> shift(-kMaxShift, kMaxShift);
    ScaleTranslate st;
    st.scale = scale(rng);
    st.translation = {shift(rng), shift(rng), shift(rng)};
    return st;
}

PointCloud ScaleTranslate::apply(const PointCloud& cloud) const {
    PointCloud out = cloud;
    for (auto& p : out.points) p = p * scale + translation;
    return out;
}

PointCloud augment_scale_translate(const PointCloud& cloud, Rng& rng) {
    return ScaleTranslate::sample(rng).apply(cloud);
}

}  // namespace aecnn
