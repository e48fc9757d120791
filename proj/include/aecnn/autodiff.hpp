#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

/// Reverse-mode differentiation over dense row-major double tensors.
///
/// A Tensor is a handle to a graph node. Ops build new nodes that remember their parents and
/// a backward closure; `backward(loss)` walks the graph in reverse topological order and
/// accumulates gradients into every node that requires them. Parameters are leaves whose
/// gradients accumulate across backward calls until `zero_grad()`.
///
/// Rank-2 tensors are [rows x cols]; rank-1 tensors behave as a single row; rank-0 is a scalar.
namespace aecnn::ad {

using Shape = std::vector<std::size_t>;

namespace detail {
struct Node;
}

class Tensor {
public:
    Tensor() = default;

    static Tensor constant(Shape shape, std::vector<double> values);
    static Tensor parameter(Shape shape, std::vector<double> values);
    static Tensor zeros(Shape shape);
    static Tensor scalar(double value);

    bool defined() const { return static_cast<bool>(node_); }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t size() const;
    std::size_t rows() const;
    std::size_t cols() const;

    std::span<const double> values() const;
    /// Direct write access; only meaningful on leaves (parameters, constants).
    std::span<double> mutable_values();
    /// Empty until a backward pass reaches this node.
    std::span<const double> grad() const;
    std::span<double> mutable_grad();
    void zero_grad();

    bool requires_grad() const;
    double item() const;
    double at(std::size_t r, std::size_t c) const;

    /// Value copy with no graph history.
    Tensor detach() const;

    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
    const std::shared_ptr<detail::Node>& node() const { return node_; }

private:
    std::shared_ptr<detail::Node> node_;
};

// ---- ops -------------------------------------------------------------------------------

/// x [n x in] · weight [in x out] + bias [out].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
Tensor relu(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
/// Concatenation along the feature (column) axis; all inputs share the row count.
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_cols(std::initializer_list<Tensor> parts);
/// Row i of the result is row indices[i] of x.
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> indices);
Tensor reshape(const Tensor& x, Shape shape);

/// Column-wise maximum over all rows, returned as a rank-1 [F] tensor. The subgradient goes
/// to the lowest-index maximal row.
Tensor max_pool_set(const Tensor& x);
/// x holds consecutive groups of `group_size` rows; returns one column-wise max row per group.
Tensor group_max(const Tensor& x, std::size_t group_size);

/// Per-column standardization over the rows, followed by gamma * x̂ + beta.
Tensor standardize(const Tensor& x, const Tensor& gamma, const Tensor& beta, double epsilon = 1e-5);

/// -log softmax(logits)[label] with max subtraction; logits is a single row.
Tensor cross_entropy(const Tensor& logits, std::size_t label);
/// Mean cross entropy over rows of logits [n x c].
Tensor cross_entropy_rows(const Tensor& logits, std::span<const std::size_t> labels);
Tensor sum(const Tensor& x);

/// Row e of the result is M_e · x_e where M_e is row e of `matrices` read as a row-major F x F block.
Tensor batched_matvec(const Tensor& matrices, const Tensor& x);
/// Row i of the result is sum_j weights[i*k + j] * x[indices[i*k + j]]; weights are constants.
Tensor weighted_row_sum(const Tensor& x, std::span<const std::size_t> indices, std::span<const double> weights,
                        std::size_t k);
/// Mean over rows e of ||M_e M_eᵀ - I||_F², M_e read as in batched_matvec.
Tensor orthogonality_penalty(const Tensor& matrices);

/// Accumulates d(loss)/d(node) into every reachable node requiring gradients. Deterministic.
void backward(const Tensor& loss);

/// Multiply-add counter for linear and batched_matvec (2 FLOPs per multiply-add).
/// Counting is enabled only while a FlopScope is alive on the current thread.
class FlopScope {
public:
    FlopScope();
    ~FlopScope();
    FlopScope(const FlopScope&) = delete;
    FlopScope& operator=(const FlopScope&) = delete;
    std::uint64_t flops() const;

private:
    std::uint64_t start_;
};

}  // namespace aecnn::ad
