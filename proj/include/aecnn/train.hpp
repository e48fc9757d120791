#pragma once

#include <functional>
#include <vector>

#include "aecnn/checkpoint.hpp"
#include "aecnn/config.hpp"
#include "aecnn/data.hpp"
#include "aecnn/metrics.hpp"
#include "aecnn/network.hpp"

namespace aecnn {

struct EpochRecord {
    int epoch = 0;
    double lr = 0.0;
    double loss = 0.0;
    /// Classification accuracy or segmentation point accuracy on the augmented training samples.
    double train_accuracy = 0.0;
    /// Test accuracy (classification) or mIoU (segmentation); negative when not evaluated.
    double test_metric = -1.0;
    double seconds = 0.0;
};

/// Everything needed to continue a run besides the weights.
struct TrainState {
    int next_epoch = 0;
    AdamState optimizer;
};

struct TrainHooks {
    const Dataset* test = nullptr;
    /// Called after every epoch; returning false stops training.
    std::function<bool(const EpochRecord&)> on_epoch;
};

/// Rotation per the setting's training protocol, then a random scale/shift, then recentering.
PointCloud augment(const PointCloud& cloud, Setting setting, Rng& rng);

/// Runs epochs [state.next_epoch, config.epochs). Each epoch draws its shuffle and augmentation from
/// a generator seeded by (config.seed, epoch), so a resumed run matches an uninterrupted one.
std::vector<EpochRecord> train(AecnnModel& model, const Dataset& train_set, const TrainConfig& config,
                               TrainState& state, const TrainHooks& hooks = {});

double learning_rate(const TrainConfig& config, int epoch);

std::vector<double> class_scores(const AecnnModel& model, const PointCloud& cloud);
std::vector<int> predict_parts(const AecnnModel& model, const PointCloud& cloud);

/// Accuracy (classification) or mIoU (segmentation) under the setting's test rotations.
Metrics evaluate(const AecnnModel& model, const Dataset& dataset, Setting setting, Rng& rng, std::size_t votes = 1);

/// Optimizer moments keyed by parameter name, plus the step and next-epoch counters.
std::vector<NamedArray> snapshot_state(const TrainState& state, const ParameterList& params);
TrainState restore_state(std::span<const NamedArray> arrays, const ParameterList& params);

}  // namespace aecnn
