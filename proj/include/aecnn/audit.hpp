#pragma once

#include <span>
#include <vector>

#include "aecnn/network.hpp"

namespace aecnn {

struct AuditReport {
    std::size_t clouds = 0;
    std::size_t rotations = 0;
    /// Max |logit(R x) - logit(x)| over every cloud, rotation and output entry.
    double max_deviation = 0.0;
    /// Fraction of (cloud, rotation) pairs whose predictions (every point's, for segmentation) match.
    double agreement = 1.0;
    std::vector<double> per_cloud_deviation;

    bool vacuous() const { return clouds == 0 || rotations == 0; }
    bool passed(double tolerance) const { return max_deviation < tolerance && agreement == 1.0; }
};

/// Compares outputs on each cloud against outputs on `rotations` arbitrarily rotated copies.
/// Segmentation models are run with each cloud's class label (0 when absent).
AuditReport invariance_audit(const AecnnModel& model, std::span<const PointCloud> clouds, std::size_t rotations,
                             Rng& rng);

}  // namespace aecnn
