#include "aecnn/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace aecnn {

std::size_t parameter_count(const ParameterList& params) {
    std::size_t n = 0;
    for (const auto& p : params) n += p.tensor.size();
    return n;
}

void zero_grads(ParameterList& params) {
    for (auto& p : params) p.tensor.zero_grad();
}

Mlp::Mlp(std::string name, std::vector<std::size_t> widths, MlpOptions options, Rng& rng)
    : name_(std::move(name)), widths_(std::move(widths)), options_(options) {
    if (widths_.size() < 2) throw std::invalid_argument("Mlp " + name_ + ": needs at least input and output widths");
    for (auto w : widths_) {
        if (w == 0) throw std::invalid_argument("Mlp " + name_ + ": zero width");
    }
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
        const std::size_t in = widths_[l];
        const std::size_t out = widths_[l + 1];
        const double bound = std::sqrt(6.0 / static_cast<double>(in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        std::vector<double> w(in * out);
        for (auto& v : w) v = dist(rng);
        Layer layer;
        layer.weight = ad::Tensor::parameter({in, out}, std::move(w));
        layer.bias = ad::Tensor::parameter({out}, std::vector<double>(out, 0.0));
        const bool activated = l + 2 < widths_.size() || options_.activate_output;
        if (options_.normalize && activated) {
            layer.gamma = ad::Tensor::parameter({out}, std::vector<double>(out, 1.0));
            layer.beta = ad::Tensor::parameter({out}, std::vector<double>(out, 0.0));
        }
        layers_.push_back(std::move(layer));
    }
}

ad::Tensor Mlp::forward(const ad::Tensor& x) const {
    ad::Tensor h = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Layer& layer = layers_[l];
        h = ad::linear(h, layer.weight, layer.bias);
        const bool activated = l + 1 < layers_.size() || options_.activate_output;
        if (!activated) break;
        if (layer.gamma.defined()) h = ad::standardize(h, layer.gamma, layer.beta);
        h = ad::relu(h);
    }
    return h;
}

void Mlp::append_parameters(ParameterList& out) const {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const std::string prefix = name_ + "." + std::to_string(l) + ".";
        out.push_back({prefix + "weight", layers_[l].weight});
        out.push_back({prefix + "bias", layers_[l].bias});
        if (layers_[l].gamma.defined()) {
            out.push_back({prefix + "norm_scale", layers_[l].gamma});
            out.push_back({prefix + "norm_shift", layers_[l].beta});
        }
    }
}

void adam_step(ParameterList& params, AdamState& state, double lr) {
    if (state.first_moment.size() != params.size()) {
        state.first_moment.clear();
        state.second_moment.clear();
        for (const auto& p : params) {
            state.first_moment.emplace_back(p.tensor.size(), 0.0);
            state.second_moment.emplace_back(p.tensor.size(), 0.0);
        }
    }
    ++state.step;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& t = params[i].tensor;
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        if (m.size() != t.size()) throw std::invalid_argument("adam_step: moment shape mismatch for " + params[i].name);
        const auto g = t.grad();
        if (g.empty()) continue;  // never reached by backward
        auto w = t.mutable_values();
        for (std::size_t j = 0; j < w.size(); ++j) {
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
            const double m_hat = m[j] / c1;
            const double v_hat = v[j] / c2;
            w[j] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
        }
    }
}

double LrSchedule::at(int epoch) const {
    if (epoch < 0) throw std::invalid_argument("lr schedule: negative epoch");
    return base * std::pow(factor, static_cast<double>(epoch / std::max(1, step_epochs)));
}

LrSchedule LrSchedule::compressed(int total_epochs) {
    LrSchedule s;
    s.step_epochs = std::max(1, static_cast<int>(std::lround(100.0 * total_epochs / 250.0)));
    return s;
}

double lr_schedule(int epoch) { return LrSchedule{}.at(epoch); }

}  // namespace aecnn
