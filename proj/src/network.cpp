#include "aecnn/network.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace aecnn {

namespace {

MlpOptions shared_mlp(bool normalize) { return {normalize, true}; }

std::vector<std::size_t> chain(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
    std::vector<std::size_t> w{in};
    w.insert(w.end(), hidden.begin(), hidden.end());
    w.push_back(out);
    return w;
}

std::vector<std::size_t> chain(std::size_t in, const std::vector<std::size_t>& rest) {
    std::vector<std::size_t> w{in};
    w.insert(w.end(), rest.begin(), rest.end());
    return w;
}

void add_regularizer(ForwardStats* stats, const ad::Tensor& term) {
    if (!stats) return;
    stats->regularizer = stats->regularizer.defined() ? ad::add(stats->regularizer, term) : term;
}

std::size_t edge_input_extra(AlignVariant v) { return v == AlignVariant::PlainEdgeConv ? 0 : 3; }

}  // namespace

void EdgeGeometry::push(const Lrf& reference, const Lrf& neighbor, const Point3& neighbor_point) {
    const auto r = relative_rotation(reference, neighbor).matrix().data();
    rotation.insert(rotation.end(), r.begin(), r.end());
    const RirPoint t = relative_translation(reference, neighbor_point);
    translation.insert(translation.end(), {t.x, t.y, t.z});
    const auto& ei = reference.basis.matrix().data();
    const auto& ej = neighbor.basis.matrix().data();
    ref_basis.insert(ref_basis.end(), ei.begin(), ei.end());
    nbr_basis.insert(nbr_basis.end(), ej.begin(), ej.end());
}

AlignWeights make_align_weights(const std::string& name, AlignVariant variant, std::size_t features,
                                const std::vector<std::size_t>& hidden, Rng& rng) {
    AlignWeights w;
    w.variant = variant;
    w.features = features;
    switch (variant) {
        case AlignVariant::PlainEdgeConv:
            break;
        case AlignVariant::AEConv3:
            w.phi = Mlp(name, chain(12 + features, hidden, features), {}, rng);
            break;
        case AlignVariant::AEConv2:
            w.phi = Mlp(name, chain(21 + features, hidden, features), {}, rng);
            break;
        case AlignVariant::AEConv1: {
            w.phi = Mlp(name, chain(12, hidden, features * features), {}, rng);
            // Start as the identity transform.
            auto& last = w.phi.layers().back();
            std::fill(last.weight.mutable_values().begin(), last.weight.mutable_values().end(), 0.0);
            auto b = last.bias.mutable_values();
            std::fill(b.begin(), b.end(), 0.0);
            for (std::size_t i = 0; i < features; ++i) b[i * features + i] = 1.0;
            break;
        }
    }
    return w;
}

AecnnModel::AecnnModel(NetworkConfig config, std::uint64_t seed) : config_(std::move(config)) {
    check(config_);
    Rng rng(seed);
    const auto widths = config_.level_widths();
    const bool norm = config_.normalization;

    sa_first.h = Mlp("sa_first.h", chain(3, config_.sa_first.widths), shared_mlp(norm), rng);
    for (std::size_t i = 0; i < config_.sa_next.size(); ++i) {
        const auto& block = config_.sa_next[i];
        const std::string tag = "sa_next." + std::to_string(i);
        SaNextWeights w;
        w.align = make_align_weights(tag + ".align", config_.variant, widths[i], block.align_hidden, rng);
        w.q = Mlp(tag + ".q", chain(2 * widths[i] + edge_input_extra(config_.variant), block.widths),
                  shared_mlp(norm), rng);
        sa_next.push_back(std::move(w));
    }

    if (config_.task == Task::Classification) {
        head = Mlp("head", chain(widths.back(), config_.head_hidden, config_.n_classes), {}, rng);
        return;
    }
    const std::size_t stages = config_.sa_next.size();
    std::size_t coarse_width = widths.back();
    for (std::size_t s = 0; s < stages; ++s) {
        const std::string tag = "fp." + std::to_string(s);
        const std::size_t skip_width = widths[stages - s - 1];
        PropagationWeights w;
        w.align = make_align_weights(tag + ".align", config_.variant, coarse_width, {coarse_width}, rng);
        w.mlp = Mlp(tag + ".mlp", chain(coarse_width + skip_width, config_.fp_widths[s]), shared_mlp(norm), rng);
        coarse_width = config_.fp_widths[s].back();
        propagate.push_back(std::move(w));
    }
    seg_head = Mlp("seg_head", chain(coarse_width + config_.n_classes, config_.seg_head_hidden, config_.n_parts),
                   {norm, false}, rng);
}

ParameterList AecnnModel::parameters() const {
    ParameterList out;
    sa_first.h.append_parameters(out);
    for (const auto& b : sa_next) {
        if (b.align.variant != AlignVariant::PlainEdgeConv) b.align.phi.append_parameters(out);
        b.q.append_parameters(out);
    }
    if (config_.task == Task::Classification) {
        head.append_parameters(out);
    } else {
        for (const auto& p : propagate) {
            if (p.align.variant != AlignVariant::PlainEdgeConv) p.align.phi.append_parameters(out);
            p.mlp.append_parameters(out);
        }
        seg_head.append_parameters(out);
    }
    return out;
}

ad::Tensor pointnet_kernel(const ad::Tensor& rirs, const Mlp& h) {
    if (rirs.rows() < 1 || rirs.cols() != 3) throw std::invalid_argument("pointnet_kernel: expected a [k x 3] input");
    return ad::max_pool_set(h.forward(rirs));
}

SaOutput sa_first(const PointCloud& cloud, const NetworkConfig& config, const SaFirstWeights& weights,
                  ForwardStats* stats) {
    cloud.validate();
    const auto& cfg = config.sa_first;
    if (cfg.n_ref > cloud.size()) throw std::invalid_argument("sa_first: more references than points");
    const Point3 origin = centroid(cloud);
    const SpatialIndex index(cloud.points);

    SaOutput out;
    out.source_indices = farthest_point_sampling(cloud, cfg.n_ref);
    out.ref_points.reserve(cfg.n_ref);
    out.frames.reserve(cfg.n_ref);

    std::vector<double> rows;
    rows.reserve(cfg.n_ref * cfg.k * 3);
    std::vector<Point3> neighborhood(cfg.k);
    for (std::size_t r : out.source_indices) {
        const Point3& p = cloud.points[r];
        const auto nbrs = cfg.search == SearchMode::Knn ? index.knn(p, cfg.k) : index.ball_query(p, cfg.radius, cfg.k);
        for (std::size_t j = 0; j < nbrs.size(); ++j) neighborhood[j] = cloud.points[nbrs[j]];
        const LrfResult lrf = compute_lrf_with_fallback(p, neighborhood, origin, cfg.anchor);
        if (lrf.degenerate() && stats) ++stats->degenerate_frames;
        for (const Point3& q : neighborhood) {
            if (config.input == InputMode::Rir) {
                const RirPoint t = rir(q, lrf.frame);
                rows.insert(rows.end(), {t.x, t.y, t.z});
            } else {
                const Point3 d = q - p;
                rows.insert(rows.end(), {d.x, d.y, d.z});
            }
        }
        out.ref_points.push_back(p);
        out.frames.push_back(lrf.frame);
    }
    const ad::Tensor input = ad::Tensor::constant({cfg.n_ref * cfg.k, 3}, std::move(rows));
    out.features = ad::group_max(weights.h.forward(input), cfg.k);
    return out;
}

ad::Tensor align_features(const ad::Tensor& x, const EdgeGeometry& geometry, const AlignWeights& weights,
                          ForwardStats* stats) {
    const std::size_t e = geometry.size();
    if (x.rows() != e || x.cols() != weights.features) {
        throw std::invalid_argument("align_features: expected [" + std::to_string(e) + " x " +
                                    std::to_string(weights.features) + "] features");
    }
    if (weights.variant == AlignVariant::PlainEdgeConv) return x;
    const auto rot = ad::Tensor::constant({e, 9}, geometry.rotation);
    const auto trans = ad::Tensor::constant({e, 3}, geometry.translation);
    switch (weights.variant) {
        case AlignVariant::AEConv3:
            return weights.phi.forward(ad::concat_cols({rot, trans, x}));
        case AlignVariant::AEConv2: {
            const auto ei = ad::Tensor::constant({e, 9}, geometry.ref_basis);
            const auto ej = ad::Tensor::constant({e, 9}, geometry.nbr_basis);
            return weights.phi.forward(ad::concat_cols({ei, ej, trans, x}));
        }
        case AlignVariant::AEConv1: {
            const auto transform = weights.phi.forward(ad::concat_cols({rot, trans}));
            add_regularizer(stats, ad::orthogonality_penalty(transform));
            return ad::batched_matvec(transform, x);
        }
        case AlignVariant::PlainEdgeConv:
            break;
    }
    return x;
}

ad::Tensor align_feature(const ad::Tensor& x_j, const RotationMatrix& rotation, const RirPoint& translation,
                         const AlignWeights& weights) {
    // Express the relation as a reference frame at the identity and a neighbor frame with basis Rᵀ.
    const Lrf reference{{0.0, 0.0, 0.0}, RotationMatrix{}};
    const Lrf neighbor{{0.0, 0.0, 0.0}, rotation.transposed()};
    EdgeGeometry geometry;
    geometry.push(reference, neighbor, translation.as_point());
    return ad::reshape(align_features(ad::reshape(x_j, {1, x_j.size()}), geometry, weights), {x_j.size()});
}

ad::Tensor aligned_edge_conv(const SaOutput& prev, const NeighborGraph& graph, const SaNextWeights& weights,
                             ForwardStats* stats) {
    const std::size_t k = graph.k();
    const std::size_t m = graph.reference_indices.size();
    if (k == 0 || m == 0 || graph.neighbor_lists.size() != m) throw std::invalid_argument("aligned_edge_conv: empty graph");
    std::vector<std::size_t> ref_rows, nbr_rows;
    ref_rows.reserve(m * k);
    nbr_rows.reserve(m * k);
    EdgeGeometry geometry;
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t r = graph.reference_indices[i];
        if (graph.neighbor_lists[i].size() != k) throw std::invalid_argument("aligned_edge_conv: ragged neighbor lists");
        for (std::size_t j : graph.neighbor_lists[i]) {
            ref_rows.push_back(r);
            nbr_rows.push_back(j);
            geometry.push(prev.frames[r], prev.frames[j], prev.ref_points[j]);
        }
    }
    const auto x_i = ad::gather_rows(prev.features, ref_rows);
    const auto x_j = ad::gather_rows(prev.features, nbr_rows);
    ad::Tensor edges;
    if (weights.align.variant == AlignVariant::PlainEdgeConv) {
        edges = ad::concat_cols({x_i, ad::sub(x_j, x_i)});
    } else {
        const auto aligned = align_features(x_j, geometry, weights.align, stats);
        const auto t = ad::Tensor::constant({m * k, 3}, geometry.translation);
        edges = ad::concat_cols({x_i, ad::sub(aligned, x_i), t});
    }
    return ad::group_max(weights.q.forward(edges), k);
}

SaOutput sa_next(const SaOutput& prev, const SaNextConfig& config, const SaNextWeights& weights, ForwardStats* stats) {
    if (prev.size() < 4) throw std::invalid_argument("sa_next: needs at least 4 input references");
    const std::size_t keep = prev.size() / 4;
    SaOutput out;
    out.source_indices = farthest_point_sampling(prev.ref_points, keep);
    const FeatureView view{prev.features.values(), prev.features.rows(), prev.features.cols()};
    const NeighborGraph graph = knn_feature_graph(view, out.source_indices, config.k);
    out.features = aligned_edge_conv(prev, graph, weights, stats);
    for (std::size_t i : out.source_indices) {
        out.ref_points.push_back(prev.ref_points[i]);
        out.frames.push_back(prev.frames[i]);
    }
    return out;
}

namespace {

std::vector<SaOutput> encode(const PointCloud& cloud, const AecnnModel& model, ForwardStats* stats) {
    const auto& cfg = model.config();
    if (cloud.size() != cfg.n_points) {
        throw std::invalid_argument("expected a cloud of " + std::to_string(cfg.n_points) + " points, got " +
                                    std::to_string(cloud.size()));
    }
    std::vector<SaOutput> levels;
    levels.push_back(sa_first(cloud, cfg, model.sa_first, stats));
    for (std::size_t i = 0; i < cfg.sa_next.size(); ++i) {
        levels.push_back(sa_next(levels.back(), cfg.sa_next[i], model.sa_next[i], stats));
    }
    return levels;
}

}  // namespace

ad::Tensor classify(const PointCloud& cloud, const AecnnModel& model, ForwardStats* stats) {
    if (model.config().task != Task::Classification) throw std::invalid_argument("classify: model is not a classifier");
    const auto levels = encode(cloud, model, stats);
    return model.head.forward(ad::max_pool_set(levels.back().features));
}

ad::Tensor interpolate_aligned(const SaOutput& coarse, std::span<const Point3> fine_points,
                               std::span<const Lrf> fine_frames, const AlignWeights& align, std::size_t k,
                               ForwardStats* stats) {
    if (fine_points.size() != fine_frames.size()) throw std::invalid_argument("interpolate_aligned: points/frames mismatch");
    if (k < 1) throw std::invalid_argument("interpolate_aligned: k must be at least 1");
    const SpatialIndex index(coarse.ref_points);
    std::vector<std::size_t> rows;
    std::vector<double> weights;
    EdgeGeometry geometry;
    rows.reserve(fine_points.size() * k);
    weights.reserve(fine_points.size() * k);
    for (std::size_t f = 0; f < fine_points.size(); ++f) {
        const auto nbrs = index.knn(fine_points[f], k);
        double total = 0.0;
        const std::size_t first = weights.size();
        for (std::size_t c : nbrs) {
            const double d = std::max(distance(fine_points[f], coarse.ref_points[c]), 1e-10);
            rows.push_back(c);
            weights.push_back(1.0 / d);
            total += 1.0 / d;
            geometry.push(fine_frames[f], coarse.frames[c], coarse.ref_points[c]);
        }
        for (std::size_t i = first; i < weights.size(); ++i) weights[i] /= total;
    }
    const auto aligned = align_features(ad::gather_rows(coarse.features, rows), geometry, align, stats);
    std::vector<std::size_t> identity(rows.size());
    for (std::size_t i = 0; i < identity.size(); ++i) identity[i] = i;
    return ad::weighted_row_sum(aligned, identity, weights, k);
}

ad::Tensor feature_propagation(const SaOutput& coarse, std::span<const Point3> fine_points,
                               std::span<const Lrf> fine_frames, const ad::Tensor& skip_features,
                               const PropagationWeights& weights, std::size_t k, ForwardStats* stats) {
    if (skip_features.rows() != fine_points.size()) throw std::invalid_argument("feature_propagation: skip rows mismatch");
    const auto interpolated = interpolate_aligned(coarse, fine_points, fine_frames, weights.align, k, stats);
    return weights.mlp.forward(ad::concat_cols({interpolated, skip_features}));
}

ad::Tensor segment(const PointCloud& cloud, std::size_t object_class, const AecnnModel& model, ForwardStats* stats) {
    const auto& cfg = model.config();
    if (cfg.task != Task::Segmentation) throw std::invalid_argument("segment: model is not a segmenter");
    if (object_class >= cfg.n_classes) throw std::invalid_argument("segment: object class out of range");
    const auto levels = encode(cloud, model, stats);
    const std::size_t stages = levels.size() - 1;

    SaOutput coarse = levels.back();
    for (std::size_t s = 0; s < stages; ++s) {
        const SaOutput& fine = levels[stages - s - 1];
        coarse.features = feature_propagation(coarse, fine.ref_points, fine.frames, fine.features, model.propagate[s],
                                              cfg.interpolation_k, stats);
        coarse.ref_points = fine.ref_points;
        coarse.frames = fine.frames;
        coarse.source_indices = fine.source_indices;
    }
    const std::size_t n = cloud.size();
    std::vector<double> onehot(n * cfg.n_classes, 0.0);
    for (std::size_t i = 0; i < n; ++i) onehot[i * cfg.n_classes + object_class] = 1.0;
    const auto logits = model.seg_head.forward(
        ad::concat_cols({coarse.features, ad::Tensor::constant({n, cfg.n_classes}, std::move(onehot))}));

    // Rows follow the first block's FPS order; map back to the cloud's order.
    std::vector<std::size_t> row_of_point(n);
    for (std::size_t r = 0; r < n; ++r) row_of_point[levels.front().source_indices[r]] = r;
    return ad::gather_rows(logits, row_of_point);
}

std::uint64_t forward_flops(const PointCloud& cloud, const AecnnModel& model) {
    ad::FlopScope scope;
    if (model.config().task == Task::Classification) {
        (void)classify(cloud, model);
    } else {
        (void)segment(cloud, 0, model);
    }
    return scope.flops();
}

}  // namespace aecnn
