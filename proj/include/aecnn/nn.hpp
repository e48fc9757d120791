#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aecnn/autodiff.hpp"
#include "aecnn/geometry.hpp"

namespace aecnn {

struct NamedParameter {
    std::string name;
    ad::Tensor tensor;
};
using ParameterList = std::vector<NamedParameter>;

std::size_t parameter_count(const ParameterList& params);
void zero_grads(ParameterList& params);

struct MlpOptions {
    /// Per-feature standardization with learned scale/shift before each activation.
    bool normalize = false;
    /// ReLU after the last layer as well (shared point-wise MLPs that feed a max pool).
    bool activate_output = false;
};

/// Fully connected stack: ReLU between layers, identity (or ReLU) on the output.
class Mlp {
public:
    struct Layer {
        ad::Tensor weight;  // [in x out]
        ad::Tensor bias;    // [out]
        ad::Tensor gamma;   // [out], defined when normalized
        ad::Tensor beta;
    };

    Mlp() = default;
    /// He-uniform weights, zero biases. widths = {in, hidden..., out}, at least two entries.
    Mlp(std::string name, std::vector<std::size_t> widths, MlpOptions options, Rng& rng);

    ad::Tensor forward(const ad::Tensor& x) const;

    std::size_t in_features() const { return widths_.front(); }
    std::size_t out_features() const { return widths_.back(); }
    const std::vector<std::size_t>& widths() const { return widths_; }
    const std::string& name() const { return name_; }
    std::vector<Layer>& layers() { return layers_; }
    const std::vector<Layer>& layers() const { return layers_; }

    void append_parameters(ParameterList& out) const;

private:
    std::string name_;
    std::vector<std::size_t> widths_;
    MlpOptions options_;
    std::vector<Layer> layers_;
};

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::int64_t step = 0;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
};

/// One bias-corrected Adam update using the gradients currently stored on `params`.
void adam_step(ParameterList& params, AdamState& state, double lr);

/// Step decay: base * factor^(epoch / step_epochs).
struct LrSchedule {
    double base = 1e-3;
    double factor = 0.2;
    int step_epochs = 100;

    double at(int epoch) const;
    /// Decay points scaled so a run of `total_epochs` has the same shape as 250 epochs stepped every 100.
    static LrSchedule compressed(int total_epochs);
};

/// The reference schedule: 1e-3, scaled by 0.2 every 100 epochs.
double lr_schedule(int epoch);

}  // namespace aecnn
