#pragma once

#include <functional>
#include <vector>

#include "aecnn/config.hpp"
#include "aecnn/data.hpp"

namespace aecnn {

struct Metrics {
    Setting setting = Setting::ARAR;
    std::size_t samples = 0;
    double accuracy = 0.0;
    std::vector<double> per_class_accuracy;
    double miou = 0.0;
    std::vector<double> per_class_iou;
};

/// Class scores for one cloud; higher is more likely.
using ScoreFn = std::function<std::vector<double>(const PointCloud&)>;

/// Test-time rotation for a protocol: about +y for Y/Y, arbitrary otherwise.
RotationMatrix sample_test_rotation(Setting setting, Rng& rng);
/// Training-time rotation: arbitrary only for AR/AR.
RotationMatrix sample_train_rotation(Setting setting, Rng& rng);

/// Rotates each sample per `setting`, scores it `votes` times (fresh rotation each vote, scores summed)
/// and takes the argmax. Per-class accuracy covers classes present in the dataset; absent classes read 0.
Metrics evaluate_classification(const ScoreFn& score, const Dataset& dataset, Setting setting, Rng& rng,
                                std::size_t votes = 1);

/// Per-shape IoU averaged over parts; a part absent from both prediction and truth scores 1.
double shape_iou(const std::vector<int>& predicted, const std::vector<int>& truth, std::size_t n_parts);

/// Shape IoUs averaged within each object class, then across the classes present.
Metrics evaluate_miou(const std::vector<std::vector<int>>& predictions, const Dataset& dataset);

}  // namespace aecnn
