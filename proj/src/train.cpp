#include "aecnn/train.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <numeric>
#include <stdexcept>

namespace aecnn {

PointCloud augment(const PointCloud& cloud, Setting setting, Rng& rng) {
    const PointCloud rotated = apply_rotation(cloud, sample_train_rotation(setting, rng));
    return recenter(augment_scale_translate(rotated, rng));
}

double learning_rate(const TrainConfig& config, int epoch) {
    LrSchedule s = config.lr_step > 0 ? LrSchedule{} : LrSchedule::compressed(config.epochs);
    s.base = config.lr;
    s.factor = config.lr_factor;
    if (config.lr_step > 0) s.step_epochs = config.lr_step;
    return s.at(epoch);
}

std::vector<double> class_scores(const AecnnModel& model, const PointCloud& cloud) {
    const auto logits = classify(cloud, model);
    return {logits.values().begin(), logits.values().end()};
}

std::vector<int> predict_parts(const AecnnModel& model, const PointCloud& cloud) {
    if (!cloud.class_label) throw std::invalid_argument("predict_parts: cloud needs an object class");
    const auto logits = segment(cloud, static_cast<std::size_t>(*cloud.class_label), model);
    std::vector<int> parts(logits.rows());
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const auto row = logits.values().subspan(i * logits.cols(), logits.cols());
        parts[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return parts;
}

Metrics evaluate(const AecnnModel& model, const Dataset& dataset, Setting setting, Rng& rng, std::size_t votes) {
    if (model.config().task == Task::Classification) {
        return evaluate_classification([&](const PointCloud& c) { return class_scores(model, c); }, dataset, setting,
                                       rng, votes);
    }
    std::vector<std::vector<int>> predictions;
    predictions.reserve(dataset.size());
    for (const auto& cloud : dataset.samples) {
        predictions.push_back(predict_parts(model, apply_rotation(cloud, sample_test_rotation(setting, rng))));
    }
    Metrics m = evaluate_miou(predictions, dataset);
    m.setting = setting;
    return m;
}

namespace {

Rng epoch_rng(std::uint64_t seed, int epoch, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(stream)};
    return Rng(seq);
}

std::size_t argmax(std::span<const double> v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

struct SampleResult {
    double loss = 0.0;
    double correct = 0.0;  // fraction of correct predictions in the sample
};

SampleResult step_sample(const AecnnModel& model, const PointCloud& cloud, double scale) {
    const auto& cfg = model.config();
    ForwardStats stats;
    ad::Tensor loss;
    SampleResult r;
    if (cfg.task == Task::Classification) {
        const auto logits = classify(cloud, model, &stats);
        const auto label = static_cast<std::size_t>(*cloud.class_label);
        loss = ad::cross_entropy(logits, label);
        r.correct = argmax(logits.values()) == label ? 1.0 : 0.0;
    } else {
        const auto logits = segment(cloud, static_cast<std::size_t>(*cloud.class_label), model, &stats);
        std::vector<std::size_t> labels(cloud.part_labels->begin(), cloud.part_labels->end());
        loss = ad::cross_entropy_rows(logits, labels);
        std::size_t hits = 0;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            hits += argmax(logits.values().subspan(i * logits.cols(), logits.cols())) == labels[i];
        }
        r.correct = static_cast<double>(hits) / static_cast<double>(labels.size());
    }
    if (stats.regularizer.defined()) loss = ad::add(loss, ad::scale(stats.regularizer, cfg.orthogonality_weight));
    r.loss = loss.item();
    ad::backward(ad::scale(loss, scale));
    return r;
}

void check_training_set(const AecnnModel& model, const Dataset& data) {
    if (data.samples.empty()) throw std::invalid_argument("train: empty training set");
    const auto& cfg = model.config();
    for (const auto& c : data.samples) {
        if (!c.class_label || *c.class_label < 0 || static_cast<std::size_t>(*c.class_label) >= cfg.n_classes) {
            throw std::invalid_argument("train: sample without a valid class label");
        }
        if (cfg.task == Task::Segmentation) {
            if (!c.part_labels) throw std::invalid_argument("train: segmentation sample without part labels");
            for (int l : *c.part_labels) {
                if (l < 0 || static_cast<std::size_t>(l) >= cfg.n_parts) throw std::invalid_argument("train: part label out of range");
            }
        }
    }
}

}  // namespace

std::vector<EpochRecord> train(AecnnModel& model, const Dataset& train_set, const TrainConfig& config,
                               TrainState& state, const TrainHooks& hooks) {
    if (config.batch_size == 0) throw std::invalid_argument("train: batch size must be positive");
    check_training_set(model, train_set);
    ParameterList params = model.parameters();
    std::vector<EpochRecord> log;
    for (int epoch = state.next_epoch; epoch < config.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        Rng rng = epoch_rng(config.seed, epoch, 0);
        std::vector<std::size_t> order(train_set.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);

        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = learning_rate(config, epoch);
        for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
            const std::size_t end = std::min(order.size(), b + config.batch_size);
            zero_grads(params);
            const double scale = 1.0 / static_cast<double>(end - b);
            for (std::size_t i = b; i < end; ++i) {
                const PointCloud sample = augment(train_set.samples[order[i]], config.setting, rng);
                const SampleResult r = step_sample(model, sample, scale);
                rec.loss += r.loss;
                rec.train_accuracy += r.correct;
            }
            adam_step(params, state.optimizer, rec.lr);
        }
        rec.loss /= static_cast<double>(order.size());
        rec.train_accuracy /= static_cast<double>(order.size());
        if (hooks.test) {
            Rng eval_rng = epoch_rng(config.seed, epoch, 1);
            const Metrics m = evaluate(model, *hooks.test, config.setting, eval_rng);
            rec.test_metric = model.config().task == Task::Classification ? m.accuracy : m.miou;
        }
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        state.next_epoch = epoch + 1;
        log.push_back(rec);
        if (hooks.on_epoch && !hooks.on_epoch(rec)) break;
    }
    return log;
}

std::vector<NamedArray> snapshot_state(const TrainState& state, const ParameterList& params) {
    std::vector<NamedArray> out;
    out.push_back({"train.next_epoch", {1}, {static_cast<double>(state.next_epoch)}});
    out.push_back({"adam.step", {1}, {static_cast<double>(state.optimizer.step)}});
    const auto& opt = state.optimizer;
    if (opt.first_moment.size() == params.size()) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            const std::uint64_t n = params[i].tensor.size();
            out.push_back({"adam.m." + params[i].name, {n}, opt.first_moment[i]});
            out.push_back({"adam.v." + params[i].name, {n}, opt.second_moment[i]});
        }
    }
    return out;
}

TrainState restore_state(std::span<const NamedArray> arrays, const ParameterList& params) {
    std::map<std::string, const NamedArray*> by_name;
    for (const auto& a : arrays) by_name[a.name] = &a;
    auto scalar = [&](const std::string& name) {
        const auto it = by_name.find(name);
        if (it == by_name.end() || it->second->values.size() != 1) {
            throw std::invalid_argument("optimizer state: missing " + name);
        }
        return it->second->values[0];
    };
    TrainState state;
    state.next_epoch = static_cast<int>(scalar("train.next_epoch"));
    state.optimizer.step = static_cast<std::int64_t>(scalar("adam.step"));
    if (state.optimizer.step == 0) return state;
    for (const auto& p : params) {
        for (const char* kind : {"adam.m.", "adam.v."}) {
            const auto it = by_name.find(kind + p.name);
            if (it == by_name.end() || it->second->values.size() != p.tensor.size()) {
                throw std::invalid_argument("optimizer state: missing or mismatched " + std::string(kind) + p.name);
            }
            auto& dst = kind[5] == 'm' ? state.optimizer.first_moment : state.optimizer.second_moment;
            dst.push_back(it->second->values);
        }
    }
    return state;
}

}  // namespace aecnn
