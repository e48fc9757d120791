#include "aecnn/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>

namespace aecnn {

namespace {

constexpr std::uint32_t kLeafSize = 8;

using Candidate = std::pair<double, std::size_t>;  // (squared distance, index); pair order = rank order

// True when candidate a should be picked before b in farthest point sampling.
bool fps_prefers(double da, const Point3& pa, std::size_t ia, double db, const Point3& pb, std::size_t ib) {
    if (da != db) return da > db;
    if (pa != pb) return lexicographic_less(pa, pb);
    return ia < ib;
}

void pad_to(std::vector<std::size_t>& out, std::size_t k) {
    const std::size_t first = out.front();
    while (out.size() < k) out.push_back(first);
}

}  // namespace

std::vector<std::size_t> farthest_point_sampling(std::span<const Point3> points, std::size_t n_samples) {
    const std::size_t n = points.size();
    if (n_samples < 1 || n_samples > n) {
        throw std::invalid_argument("farthest_point_sampling: n_samples " + std::to_string(n_samples) +
                                    " outside [1, " + std::to_string(n) + "]");
    }
    const Point3 center = centroid(points);
    std::vector<double> min_sq(n);
    for (std::size_t i = 0; i < n; ++i) min_sq[i] = squared_distance(points[i], center);

    std::vector<bool> taken(n, false);
    std::vector<std::size_t> picked;
    picked.reserve(n_samples);

    auto best_remaining = [&]() {
        std::size_t best = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (taken[i]) continue;
            if (best == n || fps_prefers(min_sq[i], points[i], i, min_sq[best], points[best], best)) best = i;
        }
        return best;
    };

    std::size_t next = best_remaining();
    for (;;) {
        picked.push_back(next);
        taken[next] = true;
        if (picked.size() == n_samples) break;
        // After the seed, min_sq holds distances to the selected set, not to the centroid.
        if (picked.size() == 1) std::fill(min_sq.begin(), min_sq.end(), std::numeric_limits<double>::infinity());
        const Point3& p = points[next];
        for (std::size_t i = 0; i < n; ++i) {
            if (!taken[i]) min_sq[i] = std::min(min_sq[i], squared_distance(points[i], p));
        }
        next = best_remaining();
    }
    return picked;
}

std::vector<std::size_t> farthest_point_sampling(const PointCloud& cloud, std::size_t n_samples) {
    return farthest_point_sampling(std::span<const Point3>(cloud.points), n_samples);
}

SpatialIndex::SpatialIndex(std::vector<Point3> points) : points_(std::move(points)) {
    if (points_.empty()) throw std::invalid_argument("SpatialIndex: empty point set");
    if (points_.size() >= std::numeric_limits<std::uint32_t>::max()) {
        throw std::invalid_argument("SpatialIndex: too many points");
    }
    order_.resize(points_.size());
    for (std::uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    build(0, static_cast<std::uint32_t>(points_.size()));
}

std::int32_t SpatialIndex::build(std::uint32_t begin, std::uint32_t end) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(Node{begin, end, -1, -1, 0, 0.0});
    if (end - begin <= kLeafSize) return id;

    Point3 lo = points_[order_[begin]];
    Point3 hi = lo;
    for (std::uint32_t i = begin; i < end; ++i) {
        const Point3& p = points_[order_[i]];
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    }
    const Point3 extent = hi - lo;
    std::uint8_t axis = 0;
    if (extent.y > extent[axis]) axis = 1;
    if (extent.z > extent[axis]) axis = 2;
    if (!(extent[axis] > 0.0)) return id;  // all coincident: keep as one leaf

    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) { return points_[a][axis] < points_[b][axis]; });
    const double split = points_[order_[mid]][axis];
    const std::int32_t left = build(begin, mid);
    const std::int32_t right = build(mid, end);
    Node& node = nodes_[static_cast<std::size_t>(id)];
    node.axis = axis;
    node.split = split;
    node.left = left;
    node.right = right;
    return id;
}

std::vector<std::size_t> SpatialIndex::knn(const Point3& query, std::size_t k) const {
    if (k < 1) throw std::invalid_argument("knn: k must be at least 1");
    const std::size_t want = std::min(k, points_.size());
    std::priority_queue<Candidate> heap;  // top = current worst

    auto visit = [&](auto&& self, std::int32_t id) -> void {
        const Node& node = nodes_[static_cast<std::size_t>(id)];
        if (node.left < 0) {
            for (std::uint32_t i = node.begin; i < node.end; ++i) {
                const Candidate c{squared_distance(query, points_[order_[i]]), order_[i]};
                if (heap.size() < want) {
                    heap.push(c);
                } else if (c < heap.top()) {
                    heap.pop();
                    heap.push(c);
                }
            }
            return;
        }
        const double diff = query[node.axis] - node.split;
        const std::int32_t near = diff < 0.0 ? node.left : node.right;
        const std::int32_t far = diff < 0.0 ? node.right : node.left;
        self(self, near);
        // Equal bound is not pruned: a tied point with a smaller index may live there.
        if (heap.size() < want || diff * diff <= heap.top().first) self(self, far);
    };
    visit(visit, 0);

    std::vector<std::size_t> out(heap.size());
    for (std::size_t i = heap.size(); i-- > 0;) {
        out[i] = heap.top().second;
        heap.pop();
    }
    pad_to(out, k);
    return out;
}

std::vector<std::size_t> SpatialIndex::ball_query(const Point3& query, double radius, std::size_t max_k) const {
    if (!(radius > 0.0)) throw std::invalid_argument("ball_query: radius must be positive");
    if (max_k < 1) throw std::invalid_argument("ball_query: max_k must be at least 1");
    const double r_sq = radius * radius;
    std::vector<Candidate> found;

    auto visit = [&](auto&& self, std::int32_t id) -> void {
        const Node& node = nodes_[static_cast<std::size_t>(id)];
        if (node.left < 0) {
            for (std::uint32_t i = node.begin; i < node.end; ++i) {
                const double d = squared_distance(query, points_[order_[i]]);
                if (d <= r_sq) found.emplace_back(d, order_[i]);
            }
            return;
        }
        const double diff = query[node.axis] - node.split;
        const std::int32_t near = diff < 0.0 ? node.left : node.right;
        const std::int32_t far = diff < 0.0 ? node.right : node.left;
        self(self, near);
        if (diff * diff <= r_sq) self(self, far);
    };
    visit(visit, 0);

    if (found.empty()) {
        std::vector<std::size_t> nearest = knn(query, 1);
        pad_to(nearest, max_k);
        return nearest;
    }
    const std::size_t keep = std::min(max_k, found.size());
    std::partial_sort(found.begin(), found.begin() + static_cast<std::ptrdiff_t>(keep), found.end());
    std::vector<std::size_t> out(keep);
    for (std::size_t i = 0; i < keep; ++i) out[i] = found[i].second;
    pad_to(out, max_k);
    return out;
}

NeighborGraph knn_feature_graph(const FeatureView& features, std::span<const std::size_t> queries, std::size_t k) {
    if (features.rows < 1) throw std::invalid_argument("knn_feature_graph: no feature rows");
    if (k < 1) throw std::invalid_argument("knn_feature_graph: k must be at least 1");
    if (features.values.size() != features.rows * features.cols) {
        throw std::invalid_argument("knn_feature_graph: value count does not match shape");
    }
    for (double v : features.values) {
        if (!std::isfinite(v)) throw std::invalid_argument("knn_feature_graph: non-finite feature value");
    }
    const std::size_t n = features.rows;
    const std::size_t want = std::min(k, n);

    NeighborGraph graph;
    graph.space = NeighborSpace::Feature;
    graph.reference_indices.assign(queries.begin(), queries.end());
    graph.neighbor_lists.reserve(queries.size());

    std::vector<Candidate> cand(n);
    for (std::size_t q : queries) {
        if (q >= n) throw std::out_of_range("knn_feature_graph: query row out of range");
        const auto a = features.row(q);
        for (std::size_t j = 0; j < n; ++j) {
            const auto b = features.row(j);
            double d = 0.0;
            for (std::size_t f = 0; f < features.cols; ++f) {
                const double diff = a[f] - b[f];
                d += diff * diff;
            }
            cand[j] = {d, j};
        }
        std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(want), cand.end());
        std::vector<std::size_t> list(want);
        for (std::size_t i = 0; i < want; ++i) list[i] = cand[i].second;
        pad_to(list, k);
        graph.neighbor_lists.push_back(std::move(list));
    }
    return graph;
}

NeighborGraph knn_feature_graph(const FeatureView& features, std::size_t k) {
    std::vector<std::size_t> all(features.rows);
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return knn_feature_graph(features, all, k);
}

}  // namespace aecnn
