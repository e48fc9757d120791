#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "aecnn/geometry.hpp"

namespace aecnn {

/// Greedy max-min subsampling. The first pick is the point farthest from the centroid; every
/// tie (first pick or later) goes to the lexicographically smallest coordinate, then the smaller
/// index. The selection is therefore a function of the point *set*, not of its storage order.
std::vector<std::size_t> farthest_point_sampling(std::span<const Point3> points, std::size_t n_samples);
std::vector<std::size_t> farthest_point_sampling(const PointCloud& cloud, std::size_t n_samples);

/// Exact kd-tree over a snapshot of 3D points. Immutable after construction.
class SpatialIndex {
public:
    explicit SpatialIndex(std::vector<Point3> points);

    /// k nearest indices by ascending (distance, index). With fewer than k points the
    /// nearest one is repeated to length k.
    std::vector<std::size_t> knn(const Point3& query, std::size_t k) const;

    /// Up to max_k indices with distance <= radius, ascending by (distance, index). When
    /// nothing is in range the nearest point is used. Short lists are padded with their first entry.
    std::vector<std::size_t> ball_query(const Point3& query, double radius, std::size_t max_k) const;

    std::size_t size() const { return points_.size(); }
    const Point3& point(std::size_t i) const { return points_[i]; }
    std::span<const Point3> points() const { return points_; }

private:
    struct Node {
        std::uint32_t begin = 0;  // range into order_
        std::uint32_t end = 0;
        std::int32_t left = -1;
        std::int32_t right = -1;
        std::uint8_t axis = 0;
        double split = 0.0;
    };

    std::int32_t build(std::uint32_t begin, std::uint32_t end);

    std::vector<Point3> points_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
};

enum class NeighborSpace { Euclidean, Feature };

struct NeighborGraph {
    std::vector<std::size_t> reference_indices;
    /// One list per reference, each of the same length k, ascending by distance.
    std::vector<std::vector<std::size_t>> neighbor_lists;
    NeighborSpace space = NeighborSpace::Euclidean;

    std::size_t k() const { return neighbor_lists.empty() ? 0 : neighbor_lists.front().size(); }
};

/// Read-only row-major view of an n x F feature matrix.
struct FeatureView {
    std::span<const double> values;
    std::size_t rows = 0;
    std::size_t cols = 0;

    std::span<const double> row(std::size_t i) const { return values.subspan(i * cols, cols); }
};

/// kNN graph in feature space over every row. Self is included (distance 0, always first
/// unless an identical row has a smaller index).
NeighborGraph knn_feature_graph(const FeatureView& features, std::size_t k);
/// Same, restricted to the given query rows; neighbors range over all rows.
NeighborGraph knn_feature_graph(const FeatureView& features, std::span<const std::size_t> queries, std::size_t k);

}  // namespace aecnn
