#pragma once

#include <span>
#include <stdexcept>
#include <string>

#include "aecnn/geometry.hpp"

namespace aecnn {

/// Degeneracy threshold for frame construction, in model units.
inline constexpr double kLrfEpsilon = 1e-8;

enum class AnchorStrategy { Mean, MaxProjection };

/// Local reference frame: origin at the reference point, basis rows are the x, y, z axes.
/// z points from the global origin to the reference point, x towards the anchor's projection
/// on the plane through the reference point orthogonal to z, y = z × x.
struct Lrf {
    Point3 origin;
    RotationMatrix basis;

    Point3 x_axis() const { return basis.matrix().row(0); }
    Point3 y_axis() const { return basis.matrix().row(1); }
    Point3 z_axis() const { return basis.matrix().row(2); }
};

/// Coordinates of a point expressed in an Lrf.
struct RirPoint {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Point3 as_point() const { return {x, y, z}; }
};

class LrfError : public std::runtime_error {
public:
    enum class Kind { DegenerateReference, DegenerateAnchor };
    LrfError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

Point3 anchor_mean(std::span<const Point3> neighbors);

/// Neighbor whose projection onto the plane through `reference` orthogonal to (reference - origin)
/// lies farthest from `reference`; ties go to the smaller index.
Point3 anchor_max_projection(std::span<const Point3> neighbors, const Point3& reference, const Point3& origin);

/// Strict construction: throws LrfError on a degenerate reference or anchor.
Lrf compute_lrf(const Point3& reference, std::span<const Point3> neighbors, const Point3& origin,
                AnchorStrategy strategy);

struct LrfResult {
    Lrf frame;
    /// Set when a degenerate configuration forced a fixed-axis substitute.
    bool reference_fallback = false;
    bool anchor_fallback = false;
    bool degenerate() const { return reference_fallback || anchor_fallback; }
};

/// Never throws on degenerate geometry. A reference at the origin uses z = +z; a vanished
/// anchor projection uses the projection of +x (then +y) onto the frame plane.
LrfResult compute_lrf_with_fallback(const Point3& reference, std::span<const Point3> neighbors,
                                    const Point3& origin, AnchorStrategy strategy);

RirPoint rir(const Point3& point, const Lrf& frame);

/// e_i · e_jᵀ: maps coordinates in frame j to coordinates in frame i.
RotationMatrix relative_rotation(const Lrf& frame_i, const Lrf& frame_j);

/// Position of `point` in frame_i; identical to rir().
RirPoint relative_translation(const Lrf& frame_i, const Point3& point);

}  // namespace aecnn
