#include "aecnn/audit.hpp"

#include <algorithm>
#include <cmath>

namespace aecnn {

namespace {

ad::Tensor outputs(const AecnnModel& model, const PointCloud& cloud) {
    if (model.config().task == Task::Classification) return classify(cloud, model);
    return segment(cloud, cloud.class_label ? static_cast<std::size_t>(*cloud.class_label) : 0, model);
}

std::vector<std::size_t> row_argmax(const ad::Tensor& t) {
    const std::size_t cols = t.rank() == 1 ? t.size() : t.cols();
    std::vector<std::size_t> out;
    for (std::size_t r = 0; r < t.size() / cols; ++r) {
        const auto row = t.values().subspan(r * cols, cols);
        out.push_back(static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin()));
    }
    return out;
}

}  // namespace

AuditReport invariance_audit(const AecnnModel& model, std::span<const PointCloud> clouds, std::size_t rotations,
                             Rng& rng) {
    AuditReport report;
    report.clouds = clouds.size();
    report.rotations = rotations;
    std::size_t agree = 0;
    for (const auto& cloud : clouds) {
        const auto base = outputs(model, cloud);
        const auto base_pred = row_argmax(base);
        double worst = 0.0;
        for (std::size_t r = 0; r < rotations; ++r) {
            const auto rotated = outputs(model, apply_rotation(cloud, sample_arbitrary_rotation(rng)));
            for (std::size_t i = 0; i < base.size(); ++i) {
                worst = std::max(worst, std::abs(rotated.values()[i] - base.values()[i]));
            }
            agree += row_argmax(rotated) == base_pred;
        }
        report.per_cloud_deviation.push_back(worst);
        report.max_deviation = std::max(report.max_deviation, worst);
    }
    if (!report.vacuous()) {
        report.agreement = static_cast<double>(agree) / static_cast<double>(clouds.size() * rotations);
    }
    return report;
}

}  // namespace aecnn
