#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "aecnn/autodiff.hpp"
#include "aecnn/config.hpp"
#include "aecnn/geometry.hpp"
#include "aecnn/lrf.hpp"
#include "aecnn/neighbors.hpp"
#include "aecnn/nn.hpp"

namespace aecnn {

/// Output of a set-abstraction block: one row of features per reference point, with the
/// reference's position and frame.
struct SaOutput {
    std::vector<Point3> ref_points;
    std::vector<Lrf> frames;
    ad::Tensor features;  // [n_ref x F]
    /// Index of each reference in the block's input (the cloud for the first block).
    std::vector<std::size_t> source_indices;

    std::size_t size() const { return ref_points.size(); }
};

/// Side information gathered during a forward pass.
struct ForwardStats {
    std::size_t degenerate_frames = 0;
    /// Sum of feature-transform orthogonality penalties (AEConv1); undefined otherwise.
    ad::Tensor regularizer;
};

/// Feature alignment φ. For the plain edge-conv baseline `phi` is empty and features pass through.
struct AlignWeights {
    AlignVariant variant = AlignVariant::AEConv3;
    std::size_t features = 0;
    Mlp phi;
};

struct SaFirstWeights {
    Mlp h;
};

struct SaNextWeights {
    AlignWeights align;
    Mlp q;
};

struct PropagationWeights {
    AlignWeights align;
    Mlp mlp;
};

/// Per-edge geometry feeding the alignment: relative rotation and translation between the
/// reference frame and the neighbor frame, plus both raw bases (used only by AEConv2).
struct EdgeGeometry {
    std::vector<double> rotation;     // E x 9
    std::vector<double> translation;  // E x 3
    std::vector<double> ref_basis;    // E x 9
    std::vector<double> nbr_basis;    // E x 9

    std::size_t size() const { return translation.size() / 3; }
    void push(const Lrf& reference, const Lrf& neighbor, const Point3& neighbor_point);
};

/// Builds the alignment MLP for features of width `features`; `hidden` are its hidden widths.
AlignWeights make_align_weights(const std::string& name, AlignVariant variant, std::size_t features,
                                const std::vector<std::size_t>& hidden, Rng& rng);

class AecnnModel {
public:
    /// Validates the configuration (throws ConfigError) and initializes weights from `seed`.
    AecnnModel(NetworkConfig config, std::uint64_t seed);

    const NetworkConfig& config() const { return config_; }
    ParameterList parameters() const;

    SaFirstWeights sa_first;
    std::vector<SaNextWeights> sa_next;
    Mlp head;                                  // classification
    std::vector<PropagationWeights> propagate;  // segmentation, coarsest stage first
    Mlp seg_head;

private:
    NetworkConfig config_;
};

/// Shared MLP on every row of `rirs` [k x 3], then max pooling: one feature vector for the set.
ad::Tensor pointnet_kernel(const ad::Tensor& rirs, const Mlp& h);

SaOutput sa_first(const PointCloud& cloud, const NetworkConfig& config, const SaFirstWeights& weights,
                  ForwardStats* stats = nullptr);

/// Aligns neighbor features x [E x F] into their reference frames using per-edge geometry.
ad::Tensor align_features(const ad::Tensor& x, const EdgeGeometry& geometry, const AlignWeights& weights,
                          ForwardStats* stats = nullptr);
/// Single-feature form: x_j [F], relative rotation and translation of its frame.
ad::Tensor align_feature(const ad::Tensor& x_j, const RotationMatrix& rotation, const RirPoint& translation,
                         const AlignWeights& weights);

/// x'_i = max_j q(x_i ⊕ (x̂_j − x_i) ⊕ t_ij). Graph references and neighbors index rows of `prev`.
/// The plain edge-conv baseline uses q(x_i ⊕ (x_j − x_i)).
ad::Tensor aligned_edge_conv(const SaOutput& prev, const NeighborGraph& graph, const SaNextWeights& weights,
                             ForwardStats* stats = nullptr);

/// Keeps a quarter of the references (FPS), groups them in feature space and applies aligned edge conv.
SaOutput sa_next(const SaOutput& prev, const SaNextConfig& config, const SaNextWeights& weights,
                 ForwardStats* stats = nullptr);

/// Class logits [n_classes] for a normalized cloud of config.n_points points.
ad::Tensor classify(const PointCloud& cloud, const AecnnModel& model, ForwardStats* stats = nullptr);

/// Inverse-distance interpolation of aligned coarse features at the fine points, before the skip concat.
ad::Tensor interpolate_aligned(const SaOutput& coarse, std::span<const Point3> fine_points,
                               std::span<const Lrf> fine_frames, const AlignWeights& align, std::size_t k,
                               ForwardStats* stats = nullptr);

/// interpolate_aligned ⊕ skip features, then the unit MLP.
ad::Tensor feature_propagation(const SaOutput& coarse, std::span<const Point3> fine_points,
                               std::span<const Lrf> fine_frames, const ad::Tensor& skip_features,
                               const PropagationWeights& weights, std::size_t k, ForwardStats* stats = nullptr);

/// Per-point part logits [n x n_parts] in the cloud's point order.
ad::Tensor segment(const PointCloud& cloud, std::size_t object_class, const AecnnModel& model,
                   ForwardStats* stats = nullptr);

/// Multiply-add FLOPs of one classify (or segment) forward pass on `cloud`.
std::uint64_t forward_flops(const PointCloud& cloud, const AecnnModel& model);

}  // namespace aecnn
