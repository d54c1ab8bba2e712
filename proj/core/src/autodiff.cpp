#include "gattf/autodiff.hpp"

#include "gattf/errors.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace gattf {

namespace {

using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<Mat>;
using CMapM = Eigen::Map<const Mat>;

thread_local Tape* g_active_tape = nullptr;
thread_local bool g_grad_enabled = true;

std::size_t product(const Shape& s)
{
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

void require_rank2(const Tensor& t, const char* op)
{
    if (t.rank() != 2) {
        throw ShapeError(std::string(op) + ": expected a rank-2 tensor, got " + shape_string(t.shape()));
    }
}

CMapM cmap(const Tensor& t)
{
    return CMapM(t.data().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

MapM gmap(detail::Node& n, std::size_t rows, std::size_t cols)
{
    return MapM(n.grad_buffer().data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

CMapM gcmap(const detail::Node& n, std::size_t rows, std::size_t cols)
{
    return CMapM(n.grad.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

std::size_t rows_of(const Shape& s)
{
    return s.size() == 2 ? s[0] : 1;
}

std::size_t cols_of(const Shape& s)
{
    return s.empty() ? 1 : s.back();
}

} // namespace

std::string shape_string(const Shape& shape)
{
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        s += (i ? ", " : "") + std::to_string(shape[i]);
    }
    return s + "]";
}

namespace detail {

std::vector<Scalar>& Node::grad_buffer()
{
    if (grad.empty()) {
        grad.assign(value.size(), Scalar(0));
    }
    return grad;
}

void Node::accumulate(std::span<const Scalar> g)
{
    auto& buf = grad_buffer();
    for (std::size_t i = 0; i < buf.size(); ++i) {
        buf[i] += g[i];
    }
}

} // namespace detail

Tensor::Tensor(Shape shape, std::vector<Scalar> values, bool requires_grad)
    : node_(std::make_shared<detail::Node>())
{
    if (product(shape) != values.size()) {
        throw ShapeError("tensor of shape " + shape_string(shape) + " given " + std::to_string(values.size()) +
                         " values");
    }
    node_->shape = std::move(shape);
    node_->value = std::move(values);
    node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad)
{
    return full(std::move(shape), Scalar(0), requires_grad);
}

Tensor Tensor::full(Shape shape, Scalar v, bool requires_grad)
{
    const std::size_t n = product(shape);
    return Tensor(std::move(shape), std::vector<Scalar>(n, v), requires_grad);
}

Tensor Tensor::scalar(Scalar v, bool requires_grad)
{
    return Tensor(Shape{}, std::vector<Scalar>{v}, requires_grad);
}

std::size_t Tensor::rows() const
{
    return rows_of(node_->shape);
}

std::size_t Tensor::cols() const
{
    return cols_of(node_->shape);
}

Scalar Tensor::item() const
{
    if (numel() != 1) {
        throw ContractError("item() on a tensor of shape " + shape_string(shape()));
    }
    return node_->value[0];
}

std::vector<Scalar> Tensor::grad() const
{
    return node_->grad.empty() ? std::vector<Scalar>(numel(), Scalar(0)) : node_->grad;
}

Tape::Tape() : previous_(g_active_tape)
{
    g_active_tape = this;
}

Tape::~Tape()
{
    g_active_tape = previous_;
}

Tape* Tape::active()
{
    return g_grad_enabled ? g_active_tape : nullptr;
}

void Tape::record(std::shared_ptr<detail::Node> node)
{
    nodes_.push_back(std::move(node));
}

void Tape::backward(const Tensor& loss)
{
    if (!loss.defined() || loss.numel() != 1) {
        throw ContractError("backward needs a scalar loss, got shape " +
                            (loss.defined() ? shape_string(loss.shape()) : std::string("<undefined>")));
    }
    if (!loss.requires_grad()) {
        throw ContractError("backward: loss does not depend on any parameter");
    }
    loss.node()->grad_buffer()[0] += Scalar(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        detail::Node& n = **it;
        if (n.backward && !n.grad.empty()) {
            n.backward(n);
        }
    }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled)
{
    g_grad_enabled = false;
}

NoGradGuard::~NoGradGuard()
{
    g_grad_enabled = previous_;
}

Tensor make_result(Shape shape, std::vector<Scalar> value, std::vector<Tensor> parents,
                   std::function<void(detail::Node&)> backward)
{
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    Tape* tape = Tape::active();
    const bool needs = tape != nullptr && std::any_of(parents.begin(), parents.end(),
                                                      [](const Tensor& p) { return p.requires_grad(); });
    if (needs) {
        node->requires_grad = true;
        node->backward = std::move(backward);
        for (auto& p : parents) {
            node->parents.push_back(p.node_ptr());
        }
        tape->record(node);
    }
    return Tensor(std::move(node));
}

// --- elementwise and linear algebra -------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b)
{
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    std::vector<Scalar> out(m * n);
    MapM(out.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n)).noalias() = cmap(a) * cmap(b);
    return make_result({m, n}, std::move(out), {a, b}, [m, k, n](detail::Node& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        const auto g = gcmap(self, m, n);
        if (pa.requires_grad) {
            const CMapM B(pb.value.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n));
            gmap(pa, m, k).noalias() += g * B.transpose();
        }
        if (pb.requires_grad) {
            const CMapM A(pa.value.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k));
            gmap(pb, k, n).noalias() += A.transpose() * g;
        }
    });
}

namespace {

enum class AddKind { same, row_broadcast };

AddKind add_kind(const Tensor& a, const Tensor& b, const char* op)
{
    if (a.shape() == b.shape()) {
        return AddKind::same;
    }
    if (a.rank() == 2 && b.rank() == 1 && b.dim(0) == a.cols()) {
        return AddKind::row_broadcast;
    }
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()));
}

Tensor add_impl(const Tensor& a, const Tensor& b, Scalar sign, const char* op)
{
    const AddKind kind = add_kind(a, b, op);
    const std::size_t n = a.numel();
    const std::size_t c = b.numel();
    std::vector<Scalar> out(a.data().begin(), a.data().end());
    const auto bv = b.data();
    for (std::size_t i = 0; i < n; ++i) {
        out[i] += sign * bv[kind == AddKind::same ? i : i % c];
    }
    return make_result(a.shape(), std::move(out), {a, b}, [kind, n, c, sign](detail::Node& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) {
            pa.accumulate(self.grad);
        }
        if (pb.requires_grad) {
            auto& gb = pb.grad_buffer();
            for (std::size_t i = 0; i < n; ++i) {
                gb[kind == AddKind::same ? i : i % c] += sign * self.grad[i];
            }
        }
    });
}

template <typename F, typename DF>
Tensor unary(const Tensor& x, F f, DF df)
{
    std::vector<Scalar> out(x.numel());
    const auto xv = x.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = f(xv[i]);
    }
    return make_result(x.shape(), std::move(out), {x}, [df](detail::Node& self) {
        auto& px = *self.parents[0];
        if (!px.requires_grad) {
            return;
        }
        auto& g = px.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] += self.grad[i] * df(px.value[i], self.value[i]);
        }
    });
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b)
{
    return add_impl(a, b, Scalar(1), "add");
}

Tensor sub(const Tensor& a, const Tensor& b)
{
    return add_impl(a, b, Scalar(-1), "sub");
}

Tensor mul(const Tensor& a, const Tensor& b)
{
    if (a.shape() != b.shape()) {
        throw ShapeError("mul: incompatible shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()));
    }
    std::vector<Scalar> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = a.data()[i] * b.data()[i];
    }
    return make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) {
            auto& g = pa.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += self.grad[i] * pb.value[i];
            }
        }
        if (pb.requires_grad) {
            auto& g = pb.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += self.grad[i] * pa.value[i];
            }
        }
    });
}

Tensor mul_scalar(const Tensor& a, Scalar s)
{
    return unary(a, [s](Scalar x) { return x * s; }, [s](Scalar, Scalar) { return s; });
}

Tensor add_scalar(const Tensor& a, Scalar s)
{
    return unary(a, [s](Scalar x) { return x + s; }, [](Scalar, Scalar) { return Scalar(1); });
}

Tensor gelu(const Tensor& x)
{
    constexpr Scalar c = Scalar(0.7978845608028654); // sqrt(2 / pi)
    constexpr Scalar a = Scalar(0.044715);
    return unary(
        x,
        [](Scalar v) { return Scalar(0.5) * v * (Scalar(1) + std::tanh(c * (v + a * v * v * v))); },
        [](Scalar v, Scalar) {
            const Scalar t = std::tanh(c * (v + a * v * v * v));
            return Scalar(0.5) * (Scalar(1) + t) +
                   Scalar(0.5) * v * (Scalar(1) - t * t) * c * (Scalar(1) + Scalar(3) * a * v * v);
        });
}

Tensor softplus(const Tensor& x)
{
    return unary(
        x, [](Scalar v) { return v > Scalar(30) ? v : std::log1p(std::exp(v)); },
        [](Scalar v, Scalar) { return Scalar(1) / (Scalar(1) + std::exp(-v)); });
}

Tensor tanh(const Tensor& x)
{
    return unary(
        x, [](Scalar v) { return std::tanh(v); }, [](Scalar, Scalar y) { return Scalar(1) - y * y; });
}

Tensor softmax_lastdim(const Tensor& x, std::span<const Scalar> mask)
{
    if (!mask.empty() && mask.size() != x.numel()) {
        throw ShapeError("softmax: mask has " + std::to_string(mask.size()) + " entries for shape " +
                         shape_string(x.shape()));
    }
    const std::size_t r = x.rows(), c = x.cols();
    std::vector<Scalar> out(x.numel());
    for (std::size_t i = 0; i < r; ++i) {
        Scalar m = -std::numeric_limits<Scalar>::infinity();
        for (std::size_t j = 0; j < c; ++j) {
            const Scalar v = x.data()[i * c + j] + (mask.empty() ? Scalar(0) : mask[i * c + j]);
            out[i * c + j] = v;
            m = std::max(m, v);
        }
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            out[i * c + j] = std::exp(out[i * c + j] - m);
            s += out[i * c + j];
        }
        for (std::size_t j = 0; j < c; ++j) {
            out[i * c + j] = static_cast<Scalar>(out[i * c + j] / s);
        }
    }
    return make_result(x.shape(), std::move(out), {x}, [r, c](detail::Node& self) {
        auto& px = *self.parents[0];
        if (!px.requires_grad) {
            return;
        }
        auto& g = px.grad_buffer();
        for (std::size_t i = 0; i < r; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
                dot += self.grad[i * c + j] * self.value[i * c + j];
            }
            for (std::size_t j = 0; j < c; ++j) {
                g[i * c + j] += self.value[i * c + j] * static_cast<Scalar>(self.grad[i * c + j] - dot);
            }
        }
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, Scalar eps)
{
    const std::size_t r = x.rows(), c = x.cols();
    if (gain.numel() != c || bias.numel() != c) {
        throw ShapeError("layer_norm: input " + shape_string(x.shape()) + " with gain " + shape_string(gain.shape()) +
                         " and bias " + shape_string(bias.shape()));
    }
    std::vector<Scalar> out(x.numel());
    auto xhat = std::make_shared<std::vector<Scalar>>(x.numel());
    auto inv_std = std::make_shared<std::vector<double>>(r);
    for (std::size_t i = 0; i < r; ++i) {
        double mu = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            mu += x.data()[i * c + j];
        }
        mu /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            const double d = x.data()[i * c + j] - mu;
            var += d * d;
        }
        var /= static_cast<double>(c);
        const double is = 1.0 / std::sqrt(var + static_cast<double>(eps));
        (*inv_std)[i] = is;
        for (std::size_t j = 0; j < c; ++j) {
            const auto h = static_cast<Scalar>((x.data()[i * c + j] - mu) * is);
            (*xhat)[i * c + j] = h;
            out[i * c + j] = h * gain.data()[j] + bias.data()[j];
        }
    }
    return make_result(x.shape(), std::move(out), {x, gain, bias}, [r, c, xhat, inv_std](detail::Node& self) {
        auto& px = *self.parents[0];
        auto& pg = *self.parents[1];
        auto& pb = *self.parents[2];
        const auto& gy = self.grad;
        if (pg.requires_grad) {
            auto& g = pg.grad_buffer();
            for (std::size_t i = 0; i < r; ++i) {
                for (std::size_t j = 0; j < c; ++j) {
                    g[j] += gy[i * c + j] * (*xhat)[i * c + j];
                }
            }
        }
        if (pb.requires_grad) {
            auto& g = pb.grad_buffer();
            for (std::size_t i = 0; i < r; ++i) {
                for (std::size_t j = 0; j < c; ++j) {
                    g[j] += gy[i * c + j];
                }
            }
        }
        if (px.requires_grad) {
            auto& g = px.grad_buffer();
            for (std::size_t i = 0; i < r; ++i) {
                double m1 = 0.0, m2 = 0.0;
                for (std::size_t j = 0; j < c; ++j) {
                    const double dh = gy[i * c + j] * pg.value[j];
                    m1 += dh;
                    m2 += dh * (*xhat)[i * c + j];
                }
                m1 /= static_cast<double>(c);
                m2 /= static_cast<double>(c);
                for (std::size_t j = 0; j < c; ++j) {
                    const double dh = gy[i * c + j] * pg.value[j];
                    g[i * c + j] += static_cast<Scalar>((*inv_std)[i] * (dh - m1 - (*xhat)[i * c + j] * m2));
                }
            }
        }
    });
}

Tensor embed(const Tensor& table, std::span<const std::size_t> indices)
{
    require_rank2(table, "embed");
    const std::size_t d = table.cols();
    std::vector<Scalar> out(indices.size() * d);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= table.rows()) {
            throw RangeError("embed: index " + std::to_string(indices[i]) + " outside table of " +
                             std::to_string(table.rows()) + " rows");
        }
        std::copy_n(table.data().begin() + static_cast<std::ptrdiff_t>(indices[i] * d), d,
                    out.begin() + static_cast<std::ptrdiff_t>(i * d));
    }
    std::vector<std::size_t> idx(indices.begin(), indices.end());
    return make_result({indices.size(), d}, std::move(out), {table}, [idx, d](detail::Node& self) {
        auto& pt = *self.parents[0];
        if (!pt.requires_grad) {
            return;
        }
        auto& g = pt.grad_buffer();
        for (std::size_t i = 0; i < idx.size(); ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                g[idx[i] * d + j] += self.grad[i * d + j];
            }
        }
    });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis)
{
    if (parts.empty()) {
        throw ShapeError("concat of no tensors");
    }
    if (axis > 1) {
        throw ShapeError("concat: axis must be 0 or 1");
    }
    for (const auto& p : parts) {
        require_rank2(p, "concat");
    }
    const std::size_t r0 = parts[0].rows(), c0 = parts[0].cols();
    std::size_t total = 0;
    for (const auto& p : parts) {
        if ((axis == 0 && p.cols() != c0) || (axis == 1 && p.rows() != r0)) {
            throw ShapeError("concat: " + shape_string(parts[0].shape()) + " vs " + shape_string(p.shape()) +
                             " along axis " + std::to_string(axis));
        }
        total += axis == 0 ? p.rows() : p.cols();
    }
    const std::size_t R = axis == 0 ? total : r0;
    const std::size_t C = axis == 0 ? c0 : total;
    std::vector<Scalar> out(R * C);
    std::vector<std::size_t> offsets;
    std::size_t off = 0;
    for (const auto& p : parts) {
        offsets.push_back(off);
        for (std::size_t i = 0; i < p.rows(); ++i) {
            for (std::size_t j = 0; j < p.cols(); ++j) {
                const std::size_t oi = axis == 0 ? off + i : i;
                const std::size_t oj = axis == 0 ? j : off + j;
                out[oi * C + oj] = p.data()[i * p.cols() + j];
            }
        }
        off += axis == 0 ? p.rows() : p.cols();
    }
    return make_result({R, C}, std::move(out), parts, [axis, C, offsets](detail::Node& self) {
        for (std::size_t k = 0; k < self.parents.size(); ++k) {
            auto& p = *self.parents[k];
            if (!p.requires_grad) {
                continue;
            }
            const std::size_t pr = p.shape[0], pc = p.shape[1];
            auto& g = p.grad_buffer();
            for (std::size_t i = 0; i < pr; ++i) {
                for (std::size_t j = 0; j < pc; ++j) {
                    const std::size_t oi = axis == 0 ? offsets[k] + i : i;
                    const std::size_t oj = axis == 0 ? j : offsets[k] + j;
                    g[i * pc + j] += self.grad[oi * C + oj];
                }
            }
        }
    });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t from, std::size_t to)
{
    require_rank2(x, "slice");
    const std::size_t r = x.rows(), c = x.cols();
    const std::size_t extent = axis == 0 ? r : c;
    if (axis > 1 || from >= to || to > extent) {
        throw ShapeError("slice [" + std::to_string(from) + ", " + std::to_string(to) + ") on axis " +
                         std::to_string(axis) + " of " + shape_string(x.shape()));
    }
    const std::size_t R = axis == 0 ? to - from : r;
    const std::size_t C = axis == 0 ? c : to - from;
    std::vector<Scalar> out(R * C);
    for (std::size_t i = 0; i < R; ++i) {
        for (std::size_t j = 0; j < C; ++j) {
            out[i * C + j] = axis == 0 ? x.data()[(from + i) * c + j] : x.data()[i * c + from + j];
        }
    }
    return make_result({R, C}, std::move(out), {x}, [axis, from, R, C, c](detail::Node& self) {
        auto& px = *self.parents[0];
        if (!px.requires_grad) {
            return;
        }
        auto& g = px.grad_buffer();
        for (std::size_t i = 0; i < R; ++i) {
            for (std::size_t j = 0; j < C; ++j) {
                g[axis == 0 ? (from + i) * c + j : i * c + from + j] += self.grad[i * C + j];
            }
        }
    });
}

Tensor transpose(const Tensor& x)
{
    require_rank2(x, "transpose");
    const std::size_t r = x.rows(), c = x.cols();
    std::vector<Scalar> out(r * c);
    MapM(out.data(), static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r)) = cmap(x).transpose();
    return make_result({c, r}, std::move(out), {x}, [r, c](detail::Node& self) {
        auto& px = *self.parents[0];
        if (px.requires_grad) {
            gmap(px, r, c) += gcmap(self, c, r).transpose();
        }
    });
}

Tensor sum(const Tensor& x)
{
    double s = 0.0;
    for (Scalar v : x.data()) {
        s += v;
    }
    return make_result({}, {static_cast<Scalar>(s)}, {x}, [](detail::Node& self) {
        auto& px = *self.parents[0];
        if (!px.requires_grad) {
            return;
        }
        for (auto& g : px.grad_buffer()) {
            g += self.grad[0];
        }
    });
}

Tensor mean(const Tensor& x)
{
    if (x.numel() == 0) {
        throw ShapeError("mean of an empty tensor");
    }
    return mul_scalar(sum(x), Scalar(1) / static_cast<Scalar>(x.numel()));
}

Tensor broadcast_rows(const Tensor& row, std::size_t n)
{
    const std::size_t c = row.numel();
    std::vector<Scalar> out(n * c);
    for (std::size_t i = 0; i < n; ++i) {
        std::copy(row.data().begin(), row.data().end(), out.begin() + static_cast<std::ptrdiff_t>(i * c));
    }
    return make_result({n, c}, std::move(out), {row}, [n, c](detail::Node& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) {
            return;
        }
        auto& g = p.grad_buffer();
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < c; ++j) {
                g[j] += self.grad[i * c + j];
            }
        }
    });
}

Tensor dropout(const Tensor& x, Scalar p, std::mt19937_64& rng)
{
    if (p <= Scalar(0)) {
        return x;
    }
    if (p >= Scalar(1)) {
        throw ValidationError("dropout probability must be below 1");
    }
    std::bernoulli_distribution keep(1.0 - static_cast<double>(p));
    const Scalar s = Scalar(1) / (Scalar(1) - p);
    auto m = std::make_shared<std::vector<Scalar>>(x.numel());
    std::vector<Scalar> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        (*m)[i] = keep(rng) ? s : Scalar(0);
        out[i] = x.data()[i] * (*m)[i];
    }
    return make_result(x.shape(), std::move(out), {x}, [m](detail::Node& self) {
        auto& px = *self.parents[0];
        if (!px.requires_grad) {
            return;
        }
        auto& g = px.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] += self.grad[i] * (*m)[i];
        }
    });
}

// --- attention ----------------------------------------------------------------------

Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads, bool causal)
{
    require_rank2(q, "attention");
    require_rank2(k, "attention");
    require_rank2(v, "attention");
    const std::size_t tq = q.rows(), tk = k.rows(), d = q.cols();
    if (k.cols() != d || v.cols() != d || v.rows() != tk || heads == 0 || d % heads != 0) {
        throw ShapeError("attention: q " + shape_string(q.shape()) + ", k " + shape_string(k.shape()) + ", v " +
                         shape_string(v.shape()) + ", heads " + std::to_string(heads));
    }
    if (causal && tk < tq) {
        throw ShapeError("causal attention needs at least as many keys as queries");
    }
    const std::size_t dh = d / heads;
    const std::size_t offset = tk - tq;
    const Scalar inv = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
    const auto Q = cmap(q), K = cmap(k), V = cmap(v);
    const auto ti = static_cast<Eigen::Index>(tq), tj = static_cast<Eigen::Index>(tk),
               dd = static_cast<Eigen::Index>(dh);

    auto probs = std::make_shared<std::vector<Mat>>(heads);
    std::vector<Scalar> out(tq * d);
    MapM O(out.data(), ti, static_cast<Eigen::Index>(d));
    for (std::size_t h = 0; h < heads; ++h) {
        const auto c0 = static_cast<Eigen::Index>(h * dh);
        Mat S = (Q.middleCols(c0, dd) * K.middleCols(c0, dd).transpose()) * inv;
        for (Eigen::Index i = 0; i < ti; ++i) {
            if (causal) {
                for (Eigen::Index j = i + static_cast<Eigen::Index>(offset) + 1; j < tj; ++j) {
                    S(i, j) += kMaskValue;
                }
            }
            const Scalar m = S.row(i).maxCoeff();
            S.row(i) = (S.row(i).array() - m).exp();
            S.row(i) /= S.row(i).sum();
        }
        O.middleCols(c0, dd).noalias() = S * V.middleCols(c0, dd);
        (*probs)[h] = std::move(S);
    }
    return make_result({tq, d}, std::move(out), {q, k, v}, [=](detail::Node& self) {
        auto& pq = *self.parents[0];
        auto& pk = *self.parents[1];
        auto& pv = *self.parents[2];
        const CMapM Qm(pq.value.data(), ti, static_cast<Eigen::Index>(d));
        const CMapM Km(pk.value.data(), tj, static_cast<Eigen::Index>(d));
        const CMapM Vm(pv.value.data(), tj, static_cast<Eigen::Index>(d));
        const auto G = gcmap(self, tq, d);
        for (std::size_t h = 0; h < heads; ++h) {
            const auto c0 = static_cast<Eigen::Index>(h * dh);
            const Mat& P = (*probs)[h];
            const Mat Gh = G.middleCols(c0, dd);
            if (pv.requires_grad) {
                gmap(pv, tk, d).middleCols(c0, dd).noalias() += P.transpose() * Gh;
            }
            if (!pq.requires_grad && !pk.requires_grad) {
                continue;
            }
            Mat dP = Gh * Vm.middleCols(c0, dd).transpose();
            const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> rowdot = (dP.array() * P.array()).rowwise().sum();
            dP = (P.array() * (dP.colwise() - rowdot).array()) * inv;
            if (pq.requires_grad) {
                gmap(pq, tq, d).middleCols(c0, dd).noalias() += dP * Km.middleCols(c0, dd);
            }
            if (pk.requires_grad) {
                gmap(pk, tk, d).middleCols(c0, dd).noalias() += dP.transpose() * Qm.middleCols(c0, dd);
            }
        }
    });
}

// --- likelihoods --------------------------------------------------------------------

double digamma(double x)
{
    double r = 0.0;
    while (x < 10.0) {
        r -= 1.0 / x;
        x += 1.0;
    }
    const double f = 1.0 / (x * x);
    return r + std::log(x) - 0.5 / x -
           f * (1.0 / 12 - f * (1.0 / 120 - f * (1.0 / 252 - f * (1.0 / 240 - f * (1.0 / 132)))));
}

double student_t_logpdf(double x, double df, double loc, double scale)
{
    const double z = (x - loc) / scale;
    return std::lgamma((df + 1) / 2) - std::lgamma(df / 2) - 0.5 * std::log(df * std::numbers::pi) -
           std::log(scale) - (df + 1) / 2 * std::log1p(z * z / df);
}

namespace {

std::size_t check_likelihood_inputs(std::initializer_list<const Tensor*> params, std::span<const Scalar> target,
                                    std::span<const std::uint8_t> mask, const char* op)
{
    const std::size_t n = target.size();
    for (const Tensor* p : params) {
        if (p->numel() != n) {
            throw ShapeError(std::string(op) + ": parameter shape " + shape_string(p->shape()) + " vs " +
                             std::to_string(n) + " targets");
        }
    }
    if (mask.size() != n) {
        throw ShapeError(std::string(op) + ": mask length " + std::to_string(mask.size()) + " vs " +
                         std::to_string(n) + " targets");
    }
    const auto m = static_cast<std::size_t>(std::count_if(mask.begin(), mask.end(), [](auto b) { return b != 0; }));
    if (m == 0) {
        throw InsufficientDataError(std::string(op) + ": no observed targets");
    }
    return m;
}

} // namespace

Tensor student_t_nll(const Tensor& df, const Tensor& loc, const Tensor& scale, std::span<const Scalar> target,
                     std::span<const std::uint8_t> mask)
{
    const std::size_t m = check_likelihood_inputs({&df, &loc, &scale}, target, mask, "student_t_nll");
    const std::size_t n = target.size();
    const double inv_m = 1.0 / static_cast<double>(m);
    std::vector<double> gdf(n, 0.0), gloc(n, 0.0), gscale(n, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (mask[i] == 0) {
            continue;
        }
        const double v = df.data()[i], mu = loc.data()[i], s = scale.data()[i];
        const double z = (static_cast<double>(target[i]) - mu) / s;
        const double q = v + z * z;
        total += -student_t_logpdf(static_cast<double>(target[i]), v, mu, s);
        gloc[i] = -(v + 1) * z / (s * q) * inv_m;
        gscale[i] = (1.0 / s - (v + 1) * z * z / (s * q)) * inv_m;
        gdf[i] = (0.5 / v + 0.5 * digamma(v / 2) - 0.5 * digamma((v + 1) / 2) + 0.5 * std::log1p(z * z / v) -
                  (v + 1) * z * z / (2 * v * q)) *
                 inv_m;
    }
    return make_result({}, {static_cast<Scalar>(total * inv_m)}, {df, loc, scale},
                       [gdf, gloc, gscale](detail::Node& self) {
                           const double g = self.grad[0];
                           const std::vector<double>* parts[3] = {&gdf, &gloc, &gscale};
                           for (std::size_t k = 0; k < 3; ++k) {
                               auto& p = *self.parents[k];
                               if (!p.requires_grad) {
                                   continue;
                               }
                               auto& buf = p.grad_buffer();
                               for (std::size_t i = 0; i < buf.size(); ++i) {
                                   buf[i] += static_cast<Scalar>(g * (*parts[k])[i]);
                               }
                           }
                       });
}

Tensor gaussian_nll(const Tensor& loc, const Tensor& scale, std::span<const Scalar> target,
                    std::span<const std::uint8_t> mask)
{
    const std::size_t m = check_likelihood_inputs({&loc, &scale}, target, mask, "gaussian_nll");
    const std::size_t n = target.size();
    const double inv_m = 1.0 / static_cast<double>(m);
    const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
    std::vector<double> gloc(n, 0.0), gscale(n, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (mask[i] == 0) {
            continue;
        }
        const double mu = loc.data()[i], s = scale.data()[i];
        const double z = (static_cast<double>(target[i]) - mu) / s;
        total += std::log(s) + half_log_2pi + 0.5 * z * z;
        gloc[i] = -z / s * inv_m;
        gscale[i] = (1.0 / s - z * z / s) * inv_m;
    }
    return make_result({}, {static_cast<Scalar>(total * inv_m)}, {loc, scale}, [gloc, gscale](detail::Node& self) {
        const double g = self.grad[0];
        const std::vector<double>* parts[2] = {&gloc, &gscale};
        for (std::size_t k = 0; k < 2; ++k) {
            auto& p = *self.parents[k];
            if (!p.requires_grad) {
                continue;
            }
            auto& buf = p.grad_buffer();
            for (std::size_t i = 0; i < buf.size(); ++i) {
                buf[i] += static_cast<Scalar>(g * (*parts[k])[i]);
            }
        }
    });
}

} // namespace gattf
