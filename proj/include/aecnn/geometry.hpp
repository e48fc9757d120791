#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace aecnn {

/// Seeded random source used by every sampling routine. Never shared across threads.
using Rng = std::mt19937_64;

struct Point3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr Point3& operator+=(const Point3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    constexpr Point3& operator-=(const Point3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    constexpr Point3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
    constexpr double operator[](std::size_t i) const { return i == 0 ? x : (i == 1 ? y : z); }
    friend constexpr bool operator==(const Point3&, const Point3&) = default;
};

constexpr Point3 operator+(Point3 a, const Point3& b) { return a += b; }
constexpr Point3 operator-(Point3 a, const Point3& b) { return a -= b; }
constexpr Point3 operator-(const Point3& a) { return {-a.x, -a.y, -a.z}; }
constexpr Point3 operator*(Point3 a, double s) { return a *= s; }
constexpr Point3 operator*(double s, Point3 a) { return a *= s; }

constexpr double dot(const Point3& a, const Point3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Point3 cross(const Point3& a, const Point3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
constexpr double squared_norm(const Point3& a) { return dot(a, a); }
inline double norm(const Point3& a) { return std::sqrt(squared_norm(a)); }

/// Squared Euclidean distance. Every neighbor search in the library goes through this
/// expression so that results are bit-identical across search strategies.
constexpr double squared_distance(const Point3& a, const Point3& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    const double dz = a.z - b.z;
    return dx * dx + dy * dy + dz * dz;
}
inline double distance(const Point3& a, const Point3& b) { return std::sqrt(squared_distance(a, b)); }

inline bool is_finite(const Point3& p) { return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z); }

/// Strict lexicographic order on coordinates (x, then y, then z).
constexpr bool lexicographic_less(const Point3& a, const Point3& b) {
    if (a.x != b.x) return a.x < b.x;
    if (a.y != b.y) return a.y < b.y;
    return a.z < b.z;
}

/// Dense row-major 3x3 matrix.
class Mat3 {
public:
    constexpr Mat3() = default;
    constexpr explicit Mat3(const std::array<double, 9>& v) : v_(v) {}
    static constexpr Mat3 identity() { return Mat3({1, 0, 0, 0, 1, 0, 0, 0, 1}); }
    static constexpr Mat3 from_rows(const Point3& r0, const Point3& r1, const Point3& r2) {
        return Mat3({r0.x, r0.y, r0.z, r1.x, r1.y, r1.z, r2.x, r2.y, r2.z});
    }

    constexpr double operator()(std::size_t r, std::size_t c) const { return v_[3 * r + c]; }
    constexpr double& operator()(std::size_t r, std::size_t c) { return v_[3 * r + c]; }
    constexpr Point3 row(std::size_t r) const { return {v_[3 * r], v_[3 * r + 1], v_[3 * r + 2]}; }
    constexpr const std::array<double, 9>& data() const { return v_; }

    constexpr Mat3 transposed() const {
        return Mat3({v_[0], v_[3], v_[6], v_[1], v_[4], v_[7], v_[2], v_[5], v_[8]});
    }
    constexpr double determinant() const {
        return v_[0] * (v_[4] * v_[8] - v_[5] * v_[7]) - v_[1] * (v_[3] * v_[8] - v_[5] * v_[6]) +
               v_[2] * (v_[3] * v_[7] - v_[4] * v_[6]);
    }
    /// Largest absolute entry of (this - other).
    double max_abs_diff(const Mat3& other) const;

    friend constexpr Mat3 operator*(const Mat3& a, const Mat3& b) {
        Mat3 r;
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j)
                r(i, j) = a(i, 0) * b(0, j) + a(i, 1) * b(1, j) + a(i, 2) * b(2, j);
        return r;
    }
    friend constexpr Point3 operator*(const Mat3& m, const Point3& p) {
        return {m(0, 0) * p.x + m(0, 1) * p.y + m(0, 2) * p.z, m(1, 0) * p.x + m(1, 1) * p.y + m(1, 2) * p.z,
                m(2, 0) * p.x + m(2, 1) * p.y + m(2, 2) * p.z};
    }
    friend constexpr bool operator==(const Mat3&, const Mat3&) = default;

private:
    std::array<double, 9> v_{};
};

/// Proper rotation, acting on column vectors: p' = R * p.
class RotationMatrix {
public:
    static constexpr double kTolerance = 1e-10;

    constexpr RotationMatrix() : m_(Mat3::identity()) {}
    /// Validates orthonormality and det = +1 within `tolerance`; throws std::invalid_argument otherwise.
    static RotationMatrix checked(const Mat3& m, double tolerance = kTolerance);
    /// Wraps a matrix already known to be a rotation (products of rotations, frame bases).
    static constexpr RotationMatrix unchecked(const Mat3& m) { return RotationMatrix(m); }

    constexpr const Mat3& matrix() const { return m_; }
    constexpr RotationMatrix transposed() const { return RotationMatrix(m_.transposed()); }
    constexpr Point3 apply(const Point3& p) const { return m_ * p; }
    /// Max deviation of R Rᵀ from identity and of det(R) from one.
    double orthonormality_error() const;

    friend constexpr RotationMatrix operator*(const RotationMatrix& a, const RotationMatrix& b) {
        return RotationMatrix(a.m_ * b.m_);
    }

private:
    constexpr explicit RotationMatrix(const Mat3& m) : m_(m) {}
    Mat3 m_;
};

struct PointCloud {
    std::vector<Point3> points;
    std::optional<int> class_label;
    std::optional<std::vector<int>> part_labels;

    std::size_t size() const { return points.size(); }
    /// Throws std::invalid_argument when empty, non-finite, or the label count mismatches.
    void validate() const;
};

/// Arithmetic mean. Summation runs in lexicographic coordinate order, so the result is
/// bitwise independent of the order the points are stored in.
Point3 centroid(std::span<const Point3> points);
Point3 centroid(const PointCloud& cloud);

/// Centers on the centroid and scales so the farthest point has norm 1.
PointCloud normalize(const PointCloud& cloud);
/// Subtracts the centroid only.
PointCloud recenter(const PointCloud& cloud);

RotationMatrix rodrigues(const Point3& axis, double angle);
/// Axis from a normalized 3D standard normal draw, angle uniform in [0, 2π).
RotationMatrix sample_arbitrary_rotation(Rng& rng);
/// Rotation about +y with angle uniform in [0, 2π).
RotationMatrix sample_y_rotation(Rng& rng);

PointCloud apply_rotation(const PointCloud& cloud, const RotationMatrix& r);

struct ScaleTranslate {
    double scale = 1.0;
    Point3 translation{};

    static constexpr double kMinScale = 2.0 / 3.0;
    static constexpr double kMaxScale = 1.5;
    static constexpr double kMaxShift = 0.2;

    static ScaleTranslate sample(Rng& rng);
    PointCloud apply(const PointCloud& cloud) const;
};

/// Draws a ScaleTranslate and applies it.
PointCloud augment_scale_translate(const PointCloud& cloud, Rng& rng);

}  // namespace aecnn
