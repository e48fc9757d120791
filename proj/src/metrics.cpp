#include "aecnn/metrics.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace aecnn {

RotationMatrix sample_test_rotation(Setting setting, Rng& rng) {
    return setting == Setting::YY ? sample_y_rotation(rng) : sample_arbitrary_rotation(rng);
}

RotationMatrix sample_train_rotation(Setting setting, Rng& rng) {
    return setting == Setting::ARAR ? sample_arbitrary_rotation(rng) : sample_y_rotation(rng);
}

Metrics evaluate_classification(const ScoreFn& score, const Dataset& dataset, Setting setting, Rng& rng,
                                std::size_t votes) {
    if (dataset.samples.empty()) throw std::invalid_argument("evaluate_classification: empty dataset");
    if (votes == 0) throw std::invalid_argument("evaluate_classification: votes must be at least 1");
    const std::size_t n_classes = dataset.class_names.size();
    std::vector<std::size_t> seen(n_classes, 0), hit(n_classes, 0);
    std::size_t correct = 0;
    for (const auto& cloud : dataset.samples) {
        if (!cloud.class_label) throw std::invalid_argument("evaluate_classification: unlabeled sample");
        std::vector<double> total;
        for (std::size_t v = 0; v < votes; ++v) {
            const auto s = score(apply_rotation(cloud, sample_test_rotation(setting, rng)));
            if (total.empty()) total.assign(s.size(), 0.0);
            if (s.size() != total.size() || s.empty()) throw std::invalid_argument("evaluate_classification: bad scores");
            for (std::size_t c = 0; c < s.size(); ++c) total[c] += s[c];
        }
        const auto predicted = static_cast<std::size_t>(std::max_element(total.begin(), total.end()) - total.begin());
        const auto truth = static_cast<std::size_t>(*cloud.class_label);
        if (truth >= n_classes) throw std::invalid_argument("evaluate_classification: label out of range");
        ++seen[truth];
        if (predicted == truth) {
            ++hit[truth];
            ++correct;
        }
    }
    Metrics m;
    m.setting = setting;
    m.samples = dataset.samples.size();
    m.accuracy = static_cast<double>(correct) / static_cast<double>(m.samples);
    for (std::size_t c = 0; c < n_classes; ++c) {
        m.per_class_accuracy.push_back(seen[c] ? static_cast<double>(hit[c]) / static_cast<double>(seen[c]) : 0.0);
    }
    return m;
}

double shape_iou(const std::vector<int>& predicted, const std::vector<int>& truth, std::size_t n_parts) {
    if (predicted.size() != truth.size()) throw std::invalid_argument("shape_iou: length mismatch");
    if (n_parts == 0) throw std::invalid_argument("shape_iou: no parts");
    std::vector<std::size_t> inter(n_parts, 0), uni(n_parts, 0);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const int p = predicted[i];
        const int t = truth[i];
        if (p < 0 || t < 0 || static_cast<std::size_t>(p) >= n_parts || static_cast<std::size_t>(t) >= n_parts) {
            throw std::invalid_argument("shape_iou: label out of range at point " + std::to_string(i));
        }
        if (p == t) {
            ++inter[p];
            ++uni[p];
        } else {
            ++uni[p];
            ++uni[t];
        }
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < n_parts; ++k) {
        sum += uni[k] ? static_cast<double>(inter[k]) / static_cast<double>(uni[k]) : 1.0;
    }
    return sum / static_cast<double>(n_parts);
}

Metrics evaluate_miou(const std::vector<std::vector<int>>& predictions, const Dataset& dataset) {
    if (predictions.size() != dataset.samples.size()) throw std::invalid_argument("evaluate_miou: prediction count mismatch");
    if (dataset.samples.empty()) throw std::invalid_argument("evaluate_miou: empty dataset");
    const std::size_t n_classes = std::max<std::size_t>(dataset.class_names.size(), 1);
    std::vector<double> sum(n_classes, 0.0);
    std::vector<std::size_t> count(n_classes, 0);
    for (std::size_t s = 0; s < predictions.size(); ++s) {
        const auto& c = dataset.samples[s];
        if (!c.part_labels) throw std::invalid_argument("evaluate_miou: sample without part labels");
        const std::size_t cls = c.class_label ? static_cast<std::size_t>(*c.class_label) : 0;
        if (cls >= n_classes) throw std::invalid_argument("evaluate_miou: class label out of range");
        sum[cls] += shape_iou(predictions[s], *c.part_labels, dataset.part_names.size());
        ++count[cls];
    }
    Metrics m;
    m.samples = predictions.size();
    double total = 0.0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        m.per_class_iou.push_back(count[c] ? sum[c] / static_cast<double>(count[c]) : 0.0);
        if (count[c]) {
            total += m.per_class_iou.back();
            ++present;
        }
    }
    m.miou = total / static_cast<double>(present);
    return m;
}

}  // namespace aecnn
