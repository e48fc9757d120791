#include "aecnn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>

#include "kernels.hpp"

namespace aecnn::ad {

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;
    bool requires_grad = false;

    std::vector<double>& ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
        return grad;
    }
    Node& parent(std::size_t i) { return *parents[i]; }
};

}  // namespace detail

namespace {

using detail::Node;

thread_local std::uint64_t g_flops = 0;
thread_local int g_flop_depth = 0;

void count_flops(std::uint64_t multiply_adds) {
    if (g_flop_depth > 0) g_flops += 2 * multiply_adds;
}

std::size_t shape_size(const Shape& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

std::size_t shape_cols(const Shape& s) { return s.empty() ? 1 : s.back(); }
std::size_t shape_rows(const Shape& s) {
    if (s.size() <= 1) return 1;
    std::size_t n = 1;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) n *= s[i];
    return n;
}

std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
    return out + "]";
}

[[noreturn]] void shape_error(const char* op, const std::string& detail) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + detail);
}

// Builds an op result. Parents and the backward closure are kept only when a gradient can flow.
Tensor make_result(const char* op, Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                   std::function<void(Node&)> backward_fn) {
    for (double v : value) {
        if (!std::isfinite(v)) throw std::domain_error(std::string(op) + ": produced a non-finite value");
    }
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    for (const auto& p : parents) node->requires_grad = node->requires_grad || p.requires_grad();
    if (node->requires_grad) {
        node->parents.reserve(parents.size());
        for (auto& p : parents) node->parents.push_back(p.node());
        node->backward = std::move(backward_fn);
    }
    return Tensor(std::move(node));
}

void require_defined(const Tensor& t, const char* op) {
    if (!t.defined()) throw std::invalid_argument(std::string(op) + ": undefined tensor");
}

}  // namespace

// ---- Tensor ----------------------------------------------------------------------------

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
    if (shape_size(shape) != values.size()) {
        throw std::invalid_argument("Tensor: " + std::to_string(values.size()) + " values for shape " +
                                    shape_str(shape));
    }
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    return Tensor(std::move(node));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
    Tensor t = constant(std::move(shape), std::move(values));
    t.node_->requires_grad = true;
    return t;
}

Tensor Tensor::zeros(Shape shape) {
    const std::size_t n = shape_size(shape);
    return constant(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::scalar(double value) { return constant({}, {value}); }

const Shape& Tensor::shape() const {
    require_defined(*this, "shape");
    return node_->shape;
}
std::size_t Tensor::size() const { return node_ ? node_->value.size() : 0; }
std::size_t Tensor::rows() const { return shape_rows(shape()); }
std::size_t Tensor::cols() const { return shape_cols(shape()); }
std::span<const double> Tensor::values() const { return node_->value; }
std::span<double> Tensor::mutable_values() { return node_->value; }
std::span<const double> Tensor::grad() const { return node_->grad; }
std::span<double> Tensor::mutable_grad() { return node_->ensure_grad(); }
void Tensor::zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }
bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

double Tensor::item() const {
    if (size() != 1) throw std::invalid_argument("item: tensor has " + std::to_string(size()) + " elements");
    return node_->value[0];
}

double Tensor::at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }

Tensor Tensor::detach() const { return constant(shape(), node_->value); }

// ---- ops -------------------------------------------------------------------------------

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    require_defined(x, "linear");
    const std::size_t n = x.rows();
    const std::size_t in = x.cols();
    if (weight.rank() != 2 || weight.shape()[0] != in) {
        shape_error("linear", "x " + shape_str(x.shape()) + " vs weight " + shape_str(weight.shape()));
    }
    const std::size_t out = weight.shape()[1];
    if (bias.size() != out) shape_error("linear", "bias " + shape_str(bias.shape()));

    std::vector<double> y(n * out, 0.0);
    kernels::gemm_acc(x.values().data(), weight.values().data(), y.data(), n, in, out);
    const auto b = bias.values();
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < out; ++c) y[r * out + c] += b[c];
    count_flops(static_cast<std::uint64_t>(n) * in * out);

    Shape shape = x.rank() <= 1 ? Shape{out} : Shape{n, out};
    return make_result("linear", std::move(shape), std::move(y), {x, weight, bias}, [n, in, out](Node& self) {
        const double* dy = self.grad.data();
        Node& xn = self.parent(0);
        Node& wn = self.parent(1);
        Node& bn = self.parent(2);
        if (xn.requires_grad) kernels::gemm_nt_acc(dy, wn.value.data(), xn.ensure_grad().data(), n, out, in);
        if (wn.requires_grad) kernels::gemm_tn_acc(xn.value.data(), dy, wn.ensure_grad().data(), n, in, out);
        if (bn.requires_grad) {
            auto& g = bn.ensure_grad();
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t c = 0; c < out; ++c) g[c] += dy[r * out + c];
        }
    });
}

Tensor relu(const Tensor& x) {
    require_defined(x, "relu");
    std::vector<double> y(x.values().begin(), x.values().end());
    for (double& v : y) v = v > 0.0 ? v : 0.0;
    return make_result("relu", x.shape(), std::move(y), {x}, [](Node& self) {
        Node& xn = self.parent(0);
        auto& g = xn.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (xn.value[i] > 0.0) g[i] += self.grad[i];
        }
    });
}

namespace {

Tensor add_sub(const Tensor& a, const Tensor& b, double sign, const char* op) {
    require_defined(a, op);
    require_defined(b, op);
    if (a.size() != b.size() || a.cols() != b.cols()) {
        shape_error(op, shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    std::vector<double> y(a.size());
    const auto av = a.values();
    const auto bv = b.values();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] + sign * bv[i];
    return make_result(op, a.shape(), std::move(y), {a, b}, [sign](Node& self) {
        Node& an = self.parent(0);
        Node& bn = self.parent(1);
        if (an.requires_grad) {
            auto& g = an.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (bn.requires_grad) {
            auto& g = bn.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign * self.grad[i];
        }
    });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return add_sub(a, b, 1.0, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return add_sub(a, b, -1.0, "sub"); }

Tensor scale(const Tensor& x, double factor) {
    require_defined(x, "scale");
    std::vector<double> y(x.values().begin(), x.values().end());
    for (double& v : y) v *= factor;
    return make_result("scale", x.shape(), std::move(y), {x}, [factor](Node& self) {
        auto& g = self.parent(0).ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
    });
}

Tensor concat_cols(std::span<const Tensor> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: nothing to concatenate");
    const std::size_t n = parts.front().rows();
    std::size_t total = 0;
    std::vector<std::size_t> offsets;
    for (const auto& p : parts) {
        require_defined(p, "concat_cols");
        if (p.rows() != n) shape_error("concat_cols", "row counts " + std::to_string(n) + " vs " + std::to_string(p.rows()));
        offsets.push_back(total);
        total += p.cols();
    }
    std::vector<double> y(n * total);
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const auto v = parts[k].values();
        const std::size_t c = parts[k].cols();
        for (std::size_t r = 0; r < n; ++r) std::copy_n(v.begin() + r * c, c, y.begin() + r * total + offsets[k]);
    }
    const bool vector_out = parts.front().rank() <= 1 && n == 1;
    Shape shape = vector_out ? Shape{total} : Shape{n, total};
    std::vector<Tensor> parents(parts.begin(), parts.end());
    return make_result("concat_cols", std::move(shape), std::move(y), std::move(parents),
                       [offsets, n, total](Node& self) {
                           for (std::size_t k = 0; k < self.parents.size(); ++k) {
                               Node& p = self.parent(k);
                               if (!p.requires_grad) continue;
                               auto& g = p.ensure_grad();
                               const std::size_t c = shape_cols(p.shape);
                               for (std::size_t r = 0; r < n; ++r) {
                                   const double* src = self.grad.data() + r * total + offsets[k];
                                   double* dst = g.data() + r * c;
                                   for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
                               }
                           }
                       });
}

Tensor concat_cols(std::initializer_list<Tensor> parts) {
    return concat_cols(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> indices) {
    require_defined(x, "gather_rows");
    const std::size_t rows = x.rows();
    const std::size_t c = x.cols();
    std::vector<double> y(indices.size() * c);
    const auto v = x.values();
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= rows) throw std::out_of_range("gather_rows: row index out of range");
        std::copy_n(v.begin() + indices[i] * c, c, y.begin() + i * c);
    }
    std::vector<std::size_t> idx(indices.begin(), indices.end());
    return make_result("gather_rows", {indices.size(), c}, std::move(y), {x}, [idx = std::move(idx), c](Node& self) {
        auto& g = self.parent(0).ensure_grad();
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const double* src = self.grad.data() + i * c;
            double* dst = g.data() + idx[i] * c;
            for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
        }
    });
}

Tensor reshape(const Tensor& x, Shape shape) {
    require_defined(x, "reshape");
    if (shape_size(shape) != x.size()) shape_error("reshape", shape_str(x.shape()) + " -> " + shape_str(shape));
    std::vector<double> y(x.values().begin(), x.values().end());
    return make_result("reshape", std::move(shape), std::move(y), {x}, [](Node& self) {
        auto& g = self.parent(0).ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

Tensor group_max(const Tensor& x, std::size_t group_size) {
    require_defined(x, "group_max");
    const std::size_t rows = x.rows();
    const std::size_t c = x.cols();
    if (group_size == 0 || rows == 0 || rows % group_size != 0) {
        shape_error("group_max", std::to_string(rows) + " rows in groups of " + std::to_string(group_size));
    }
    const std::size_t groups = rows / group_size;
    const auto v = x.values();
    std::vector<double> y(groups * c);
    std::vector<std::size_t> arg(groups * c);
    for (std::size_t g = 0; g < groups; ++g) {
        const std::size_t base = g * group_size;
        double* out = y.data() + g * c;
        std::size_t* am = arg.data() + g * c;
        std::copy_n(v.begin() + base * c, c, out);
        std::fill_n(am, c, base);
        for (std::size_t r = base + 1; r < base + group_size; ++r) {
            const double* row = v.data() + r * c;
            for (std::size_t j = 0; j < c; ++j) {
                if (row[j] > out[j]) {
                    out[j] = row[j];
                    am[j] = r;
                }
            }
        }
    }
    return make_result("group_max", {groups, c}, std::move(y), {x}, [arg = std::move(arg), c](Node& self) {
        auto& g = self.parent(0).ensure_grad();
        for (std::size_t i = 0; i < arg.size(); ++i) g[arg[i] * c + i % c] += self.grad[i];
    });
}

Tensor max_pool_set(const Tensor& x) {
    require_defined(x, "max_pool_set");
    if (x.rows() == 0 || x.size() == 0) throw std::invalid_argument("max_pool_set: empty set");
    return reshape(group_max(x, x.rows()), {x.cols()});
}

Tensor standardize(const Tensor& x, const Tensor& gamma, const Tensor& beta, double epsilon) {
    require_defined(x, "standardize");
    const std::size_t n = x.rows();
    const std::size_t c = x.cols();
    if (gamma.size() != c || beta.size() != c) shape_error("standardize", "scale/shift vs " + shape_str(x.shape()));
    const auto v = x.values();
    std::vector<double> mean(c, 0.0), inv_std(c, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < c; ++j) mean[j] += v[r * c + j];
    for (auto& m : mean) m /= static_cast<double>(n);
    std::vector<double> var(c, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < c; ++j) {
            const double d = v[r * c + j] - mean[j];
            var[j] += d * d;
        }
    for (std::size_t j = 0; j < c; ++j) inv_std[j] = 1.0 / std::sqrt(var[j] / static_cast<double>(n) + epsilon);

    std::vector<double> xhat(n * c), y(n * c);
    const auto gv = gamma.values();
    const auto bv = beta.values();
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < c; ++j) {
            const std::size_t i = r * c + j;
            xhat[i] = (v[i] - mean[j]) * inv_std[j];
            y[i] = gv[j] * xhat[i] + bv[j];
        }
    return make_result("standardize", x.shape(), std::move(y), {x, gamma, beta},
                       [xhat = std::move(xhat), inv_std = std::move(inv_std), n, c](Node& self) {
                           Node& xn = self.parent(0);
                           Node& gn = self.parent(1);
                           Node& bn = self.parent(2);
                           const auto& dy = self.grad;
                           std::vector<double> sum_dy(c, 0.0), sum_dy_xhat(c, 0.0);
                           for (std::size_t r = 0; r < n; ++r)
                               for (std::size_t j = 0; j < c; ++j) {
                                   sum_dy[j] += dy[r * c + j];
                                   sum_dy_xhat[j] += dy[r * c + j] * xhat[r * c + j];
                               }
                           if (gn.requires_grad) {
                               auto& g = gn.ensure_grad();
                               for (std::size_t j = 0; j < c; ++j) g[j] += sum_dy_xhat[j];
                           }
                           if (bn.requires_grad) {
                               auto& g = bn.ensure_grad();
                               for (std::size_t j = 0; j < c; ++j) g[j] += sum_dy[j];
                           }
                           if (xn.requires_grad) {
                               auto& g = xn.ensure_grad();
                               const double inv_n = 1.0 / static_cast<double>(n);
                               for (std::size_t r = 0; r < n; ++r)
                                   for (std::size_t j = 0; j < c; ++j) {
                                       const std::size_t i = r * c + j;
                                       const double gamma_j = gn.value[j];
                                       g[i] += gamma_j * inv_std[j] * inv_n *
                                               (static_cast<double>(n) * dy[i] - sum_dy[j] - xhat[i] * sum_dy_xhat[j]);
                                   }
                           }
                       });
}

Tensor cross_entropy_rows(const Tensor& logits, std::span<const std::size_t> labels) {
    require_defined(logits, "cross_entropy");
    const std::size_t n = logits.rows();
    const std::size_t c = logits.cols();
    if (labels.size() != n) shape_error("cross_entropy", std::to_string(labels.size()) + " labels for " + std::to_string(n) + " rows");
    const auto v = logits.values();
    std::vector<double> softmax(n * c);
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        if (labels[r] >= c) throw std::out_of_range("cross_entropy: label out of range");
        const double* row = v.data() + r * c;
        const double m = *std::max_element(row, row + c);
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            softmax[r * c + j] = std::exp(row[j] - m);
            z += softmax[r * c + j];
        }
        for (std::size_t j = 0; j < c; ++j) softmax[r * c + j] /= z;
        total += m + std::log(z) - row[labels[r]];
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<std::size_t> lab(labels.begin(), labels.end());
    return make_result("cross_entropy", {}, {total * inv_n}, {logits},
                       [softmax = std::move(softmax), lab = std::move(lab), c, inv_n](Node& self) {
                           auto& g = self.parent(0).ensure_grad();
                           const double up = self.grad[0] * inv_n;
                           for (std::size_t r = 0; r < lab.size(); ++r)
                               for (std::size_t j = 0; j < c; ++j) {
                                   const double target = j == lab[r] ? 1.0 : 0.0;
                                   g[r * c + j] += up * (softmax[r * c + j] - target);
                               }
                       });
}

Tensor cross_entropy(const Tensor& logits, std::size_t label) {
    require_defined(logits, "cross_entropy");
    if (logits.rows() != 1) shape_error("cross_entropy", "expected a single row, got " + shape_str(logits.shape()));
    const std::size_t labels[1] = {label};
    return cross_entropy_rows(logits, labels);
}

Tensor sum(const Tensor& x) {
    require_defined(x, "sum");
    double s = 0.0;
    for (double v : x.values()) s += v;
    return make_result("sum", {}, {s}, {x}, [](Node& self) {
        auto& g = self.parent(0).ensure_grad();
        for (double& gi : g) gi += self.grad[0];
    });
}

Tensor batched_matvec(const Tensor& matrices, const Tensor& x) {
    require_defined(matrices, "batched_matvec");
    require_defined(x, "batched_matvec");
    const std::size_t e = x.rows();
    const std::size_t f = x.cols();
    if (matrices.rows() != e || matrices.cols() != f * f) {
        shape_error("batched_matvec", shape_str(matrices.shape()) + " vs " + shape_str(x.shape()));
    }
    std::vector<double> y(e * f);
    const auto mv = matrices.values();
    const auto xv = x.values();
    for (std::size_t i = 0; i < e; ++i) {
        const double* m = mv.data() + i * f * f;
        const double* xi = xv.data() + i * f;
        for (std::size_t r = 0; r < f; ++r) {
            double acc = 0.0;
            for (std::size_t c = 0; c < f; ++c) acc += m[r * f + c] * xi[c];
            y[i * f + r] = acc;
        }
    }
    count_flops(static_cast<std::uint64_t>(e) * f * f);
    return make_result("batched_matvec", {e, f}, std::move(y), {matrices, x}, [e, f](Node& self) {
        Node& mn = self.parent(0);
        Node& xn = self.parent(1);
        for (std::size_t i = 0; i < e; ++i) {
            const double* dy = self.grad.data() + i * f;
            if (mn.requires_grad) {
                double* dm = mn.ensure_grad().data() + i * f * f;
                const double* xi = xn.value.data() + i * f;
                for (std::size_t r = 0; r < f; ++r)
                    for (std::size_t c = 0; c < f; ++c) dm[r * f + c] += dy[r] * xi[c];
            }
            if (xn.requires_grad) {
                double* dx = xn.ensure_grad().data() + i * f;
                const double* m = mn.value.data() + i * f * f;
                for (std::size_t r = 0; r < f; ++r)
                    for (std::size_t c = 0; c < f; ++c) dx[c] += m[r * f + c] * dy[r];
            }
        }
    });
}

Tensor weighted_row_sum(const Tensor& x, std::span<const std::size_t> indices, std::span<const double> weights,
                        std::size_t k) {
    require_defined(x, "weighted_row_sum");
    if (k == 0 || indices.size() != weights.size() || indices.size() % k != 0) {
        shape_error("weighted_row_sum", std::to_string(indices.size()) + " indices, " +
                                            std::to_string(weights.size()) + " weights, k=" + std::to_string(k));
    }
    const std::size_t n = indices.size() / k;
    const std::size_t c = x.cols();
    const auto v = x.values();
    std::vector<double> y(n * c, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            const std::size_t src = indices[i * k + j];
            if (src >= x.rows()) throw std::out_of_range("weighted_row_sum: row index out of range");
            const double w = weights[i * k + j];
            for (std::size_t f = 0; f < c; ++f) y[i * c + f] += w * v[src * c + f];
        }
    std::vector<std::size_t> idx(indices.begin(), indices.end());
    std::vector<double> wts(weights.begin(), weights.end());
    return make_result("weighted_row_sum", {n, c}, std::move(y), {x},
                       [idx = std::move(idx), wts = std::move(wts), n, k, c](Node& self) {
                           auto& g = self.parent(0).ensure_grad();
                           for (std::size_t i = 0; i < n; ++i)
                               for (std::size_t j = 0; j < k; ++j) {
                                   const double w = wts[i * k + j];
                                   double* dst = g.data() + idx[i * k + j] * c;
                                   const double* src = self.grad.data() + i * c;
                                   for (std::size_t f = 0; f < c; ++f) dst[f] += w * src[f];
                               }
                       });
}

namespace {

/// M Mᵀ - I for a row-major f x f matrix.
std::vector<double> gram_minus_identity(const double* m, std::size_t f) {
    std::vector<double> d(f * f, 0.0);
    kernels::gemm_nt_acc(m, m, d.data(), f, f, f);
    for (std::size_t r = 0; r < f; ++r) d[r * f + r] -= 1.0;
    return d;
}

}  // namespace

Tensor orthogonality_penalty(const Tensor& matrices) {
    require_defined(matrices, "orthogonality_penalty");
    const std::size_t e = matrices.rows();
    const auto f = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(matrices.cols()))));
    if (f * f != matrices.cols() || e == 0) shape_error("orthogonality_penalty", shape_str(matrices.shape()));
    const auto mv = matrices.values();
    double total = 0.0;
    for (std::size_t i = 0; i < e; ++i) {
        for (double d : gram_minus_identity(mv.data() + i * f * f, f)) total += d * d;
    }
    count_flops(static_cast<std::uint64_t>(e) * f * f * f);
    const double inv_e = 1.0 / static_cast<double>(e);
    return make_result("orthogonality_penalty", {}, {total * inv_e}, {matrices}, [e, f, inv_e](Node& self) {
        Node& mn = self.parent(0);
        auto& g = mn.ensure_grad();
        const double up = 4.0 * self.grad[0] * inv_e;
        std::vector<double> dm(f * f);
        for (std::size_t i = 0; i < e; ++i) {
            const double* m = mn.value.data() + i * f * f;
            const auto d = gram_minus_identity(m, f);
            std::fill(dm.begin(), dm.end(), 0.0);
            kernels::gemm_acc(d.data(), m, dm.data(), f, f, f);
            for (std::size_t j = 0; j < f * f; ++j) g[i * f * f + j] += up * dm[j];
        }
    });
}

void backward(const Tensor& loss) {
    require_defined(loss, "backward");
    if (loss.size() != 1) throw std::invalid_argument("backward: loss must be a scalar");
    if (!loss.requires_grad()) return;

    // Iterative post-order DFS gives a topological order (parents before children).
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    // Interior gradients are per-pass; leaf gradients accumulate across passes.
    for (Node* n : order) {
        if (n->backward) n->grad.assign(n->value.size(), 0.0);
    }
    loss.node()->ensure_grad()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward) n->backward(*n);
    }
}

FlopScope::FlopScope() : start_(g_flops) { ++g_flop_depth; }
FlopScope::~FlopScope() { --g_flop_depth; }
std::uint64_t FlopScope::flops() const { return g_flops - start_; }

}  // namespace aecnn::ad
