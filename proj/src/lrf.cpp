#include "aecnn/lrf.hpp"

namespace aecnn {

namespace {

// Component of v orthogonal to the unit vector z.
Point3 reject(const Point3& v, const Point3& z) { return v - z * dot(v, z); }

Lrf assemble(const Point3& reference, const Point3& z, const Point3& x_dir) {
    const Point3 x = x_dir * (1.0 / norm(x_dir));
    const Point3 y = cross(z, x);
    return {reference, RotationMatrix::unchecked(Mat3::from_rows(x, y, z))};
}

Point3 pick_anchor(std::span<const Point3> neighbors, const Point3& reference, const Point3& origin,
                   AnchorStrategy strategy) {
    return strategy == AnchorStrategy::Mean ? anchor_mean(neighbors)
                                            : anchor_max_projection(neighbors, reference, origin);
}

}  // namespace

Point3 anchor_mean(std::span<const Point3> neighbors) {
    if (neighbors.empty()) throw std::invalid_argument("anchor_mean: no neighbors");
    Point3 sum{};
    for (const auto& p : neighbors) sum += p;
    return sum * (1.0 / static_cast<double>(neighbors.size()));
}

Point3 anchor_max_projection(std::span<const Point3> neighbors, const Point3& reference, const Point3& origin) {
    if (neighbors.empty()) throw std::invalid_argument("anchor_max_projection: no neighbors");
    const Point3 op = reference - origin;
    const double len = norm(op);
    if (!(len > kLrfEpsilon)) {
        throw LrfError(LrfError::Kind::DegenerateReference, "anchor_max_projection: reference coincides with origin");
    }
    const Point3 z = op * (1.0 / len);
    std::size_t best = 0;
    double best_sq = -1.0;
    for (std::size_t j = 0; j < neighbors.size(); ++j) {
        const double sq = squared_norm(reject(neighbors[j] - reference, z));
        if (sq > best_sq) {
            best_sq = sq;
            best = j;
        }
    }
    return neighbors[best];
}

Lrf compute_lrf(const Point3& reference, std::span<const Point3> neighbors, const Point3& origin,
                AnchorStrategy strategy) {
    if (neighbors.empty()) throw std::invalid_argument("compute_lrf: no neighbors");
    const Point3 op = reference - origin;
    const double len = norm(op);
    if (!(len > kLrfEpsilon)) {
        throw LrfError(LrfError::Kind::DegenerateReference, "compute_lrf: reference coincides with origin");
    }
    const Point3 z = op * (1.0 / len);
    const Point3 anchor = pick_anchor(neighbors, reference, origin, strategy);
    // Projection of the anchor onto the plane, with vectors rooted at the global origin.
    const Point3 to_anchor = reject(anchor - origin, z);
    if (!(norm(to_anchor) > kLrfEpsilon)) {
        throw LrfError(LrfError::Kind::DegenerateAnchor, "compute_lrf: anchor projects onto the reference point");
    }
    return assemble(reference, z, to_anchor);
}

LrfResult compute_lrf_with_fallback(const Point3& reference, std::span<const Point3> neighbors,
                                    const Point3& origin, AnchorStrategy strategy) {
    if (neighbors.empty()) throw std::invalid_argument("compute_lrf: no neighbors");
    LrfResult result;
    const Point3 op = reference - origin;
    const double len = norm(op);
    Point3 z{0.0, 0.0, 1.0};
    if (len > kLrfEpsilon) {
        z = op * (1.0 / len);
    } else {
        result.reference_fallback = true;
    }

    Point3 x_dir{};
    if (!result.reference_fallback || strategy == AnchorStrategy::Mean) {
        x_dir = reject(pick_anchor(neighbors, reference, origin, strategy) - origin, z);
    } else {
        // Max-projection needs a valid z from the geometry; measure against the fallback z instead.
        std::size_t best = 0;
        double best_sq = -1.0;
        for (std::size_t j = 0; j < neighbors.size(); ++j) {
            const double sq = squared_norm(reject(neighbors[j] - reference, z));
            if (sq > best_sq) {
                best_sq = sq;
                best = j;
            }
        }
        x_dir = reject(neighbors[best] - origin, z);
    }
    if (!(norm(x_dir) > kLrfEpsilon)) {
        result.anchor_fallback = true;
        x_dir = reject({1.0, 0.0, 0.0}, z);
        if (!(norm(x_dir) > kLrfEpsilon)) x_dir = reject({0.0, 1.0, 0.0}, z);
    }
    result.frame = assemble(reference, z, x_dir);
    return result;
}

RirPoint rir(const Point3& point, const Lrf& frame) {
    const Point3 d = point - frame.origin;
    const Point3 t = frame.basis.apply(d);
    return {t.x, t.y, t.z};
}

RotationMatrix relative_rotation(const Lrf& frame_i, const Lrf& frame_j) {
    return frame_i.basis * frame_j.basis.transposed();
}

RirPoint relative_translation(const Lrf& frame_i, const Point3& point) { return rir(point, frame_i); }

}  // namespace aecnn
