#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace gattf {

#if defined(GATTF_FLOAT32)
using Scalar = float;
#else
using Scalar = double;
#endif

/// Additive attention-mask value for disallowed positions.
inline constexpr Scalar kMaskValue = Scalar(-1e9);

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

namespace detail {

struct Node {
    Shape shape;
    std::vector<Scalar> value;
    std::vector<Scalar> grad; // empty until first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    void accumulate(std::span<const Scalar> g);
    std::vector<Scalar>& grad_buffer();
};

} // namespace detail

/// Dense row-major tensor handle. Copies share storage.
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<Scalar> values, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, Scalar v, bool requires_grad = false);
    static Tensor scalar(Scalar v, bool requires_grad = false);

    bool defined() const noexcept { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t numel() const { return node_->value.size(); }
    /// Rows and columns of a rank-1 or rank-2 tensor (rank 1 is one row).
    std::size_t rows() const;
    std::size_t cols() const;

    std::span<Scalar> data() { return node_->value; }
    std::span<const Scalar> data() const { return node_->value; }
    Scalar item() const;
    Scalar at(std::size_t i) const { return node_->value.at(i); }
    Scalar at(std::size_t r, std::size_t c) const { return node_->value.at(r * cols() + c); }

    bool requires_grad() const { return node_->requires_grad; }
    /// Gradient of the last backward pass; zeros if none reached this tensor.
    std::vector<Scalar> grad() const;
    bool has_grad() const { return !node_->grad.empty(); }
    std::span<Scalar> grad_span() { return node_->grad_buffer(); }
    void zero_grad() { node_->grad.clear(); }

    detail::Node* node() const { return node_.get(); }
    const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
    std::shared_ptr<detail::Node> node_;

    friend Tensor make_result(Shape, std::vector<Scalar>, std::vector<Tensor>, std::function<void(detail::Node&)>);
};

/// Records differentiable operations while alive. Tapes nest per thread;
/// the innermost one is active. Without an active tape operations are
/// evaluated without building a graph.
class Tape {
public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Reverse-mode sweep from a scalar loss. Throws ContractError otherwise.
    void backward(const Tensor& loss);
    std::size_t size() const noexcept { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    static Tape* active();
    void record(std::shared_ptr<detail::Node> node);

private:
    std::vector<std::shared_ptr<detail::Node>> nodes_;
    Tape* previous_ = nullptr;
};

/// Suspends recording on this thread while alive.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

/// Builds a result node, recording it when a tape is active and any input
/// requires grad. Exposed for fused operations defined outside this file.
Tensor make_result(Shape shape, std::vector<Scalar> value, std::vector<Tensor> parents,
                   std::function<void(detail::Node&)> backward);

// Operations. Rank-2 tensors are [rows, cols]; "row vector" means rank 1
// with cols entries.

Tensor matmul(const Tensor& a, const Tensor& b);
/// a + b with equal shapes, or b a row vector broadcast over the rows of a.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
/// Elementwise product, equal shapes.
Tensor mul(const Tensor& a, const Tensor& b);
Tensor mul_scalar(const Tensor& a, Scalar s);
Tensor add_scalar(const Tensor& a, Scalar s);
/// Softmax over the last dimension after adding `mask` (same shape, or empty).
Tensor softmax_lastdim(const Tensor& x, std::span<const Scalar> mask = {});
/// Normalizes each row, then applies gain and bias (row vectors).
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, Scalar eps = Scalar(1e-5));
/// tanh approximation.
Tensor gelu(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor tanh(const Tensor& x);
/// Rows of `table` selected by `indices`.
Tensor embed(const Tensor& table, std::span<const std::size_t> indices);
/// Concatenation of rank-2 tensors along axis 0 (rows) or 1 (columns).
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
/// [from, to) along axis 0 or 1 of a rank-2 tensor.
Tensor slice(const Tensor& x, std::size_t axis, std::size_t from, std::size_t to);
Tensor transpose(const Tensor& x);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Repeats a row vector `n` times into an [n, cols] tensor.
Tensor broadcast_rows(const Tensor& row, std::size_t n);
/// Inverted dropout; identity when p == 0.
Tensor dropout(const Tensor& x, Scalar p, std::mt19937_64& rng);

/// Multi-head scaled dot-product attention. q is [Tq, d]; k and v are
/// [Tk, d]; d is split into `heads` contiguous blocks. With `causal`, query
/// i may only see keys j <= i + (Tk - Tq).
Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads, bool causal);

/// Mean Student-t negative log-likelihood over positions with mask != 0.
/// df, loc and scale are [T] or [T, 1]. Throws InsufficientDataError if the
/// mask selects nothing.
Tensor student_t_nll(const Tensor& df, const Tensor& loc, const Tensor& scale, std::span<const Scalar> target,
                     std::span<const std::uint8_t> mask);
Tensor gaussian_nll(const Tensor& loc, const Tensor& scale, std::span<const Scalar> target,
                    std::span<const std::uint8_t> mask);

/// Student-t log density, used by tests and the sampler.
double student_t_logpdf(double x, double df, double loc, double scale);
double digamma(double x);

} // namespace gattf
