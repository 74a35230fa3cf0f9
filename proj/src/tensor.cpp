#include "ttm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace ttm {

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << " x ";
        os << s[i];
    }
    os << "]";
    return os.str();
}

std::int64_t shape_numel(const Shape& s) {
    std::int64_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

namespace {

using detail::TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

void check_shape_positive(const Shape& s, const char* op) {
    for (auto d : s) {
        if (d <= 0) throw ShapeError(std::string(op) + ": non-positive dimension in " + shape_str(s));
    }
}

NodePtr make_result(Shape shape, std::vector<NodePtr> parents, const char* op) {
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->data.resize(static_cast<std::size_t>(shape_numel(n->shape)));
    n->parents = std::move(parents);
    n->op = op;
    for (auto& p : n->parents) {
        if (p->requires_grad) { n->requires_grad = true; break; }
    }
    return n;
}

// b broadcasts into a when b's shape is a suffix of a's shape (scalar is the
// empty/[1] suffix). Row-major layout makes the mapping i -> i % numel(b).
bool suffix_broadcastable(const Shape& a, const Shape& b) {
    if (shape_numel(b) == 1) return true;
    if (b.size() > a.size()) return false;
    return std::equal(b.rbegin(), b.rend(), a.rbegin());
}

} // namespace

Tensor::Tensor(Shape shape, real fill, bool requires_grad) {
    check_shape_positive(shape, "tensor");
    n_ = std::make_shared<TensorNode>();
    n_->shape = std::move(shape);
    n_->data.assign(static_cast<std::size_t>(shape_numel(n_->shape)), fill);
    n_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<real> data, bool requires_grad) {
    check_shape_positive(shape, "tensor");
    if (shape_numel(shape) != static_cast<std::int64_t>(data.size()))
        throw ShapeError("tensor: data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
    n_ = std::make_shared<TensorNode>();
    n_->shape = std::move(shape);
    n_->data = std::move(data);
    n_->requires_grad = requires_grad;
}

Tensor Tensor::detached() const {
    return Tensor(n_->shape, n_->data, false);
}

// ---------------------------------------------------------------------------
// matmul over the last axis
// ---------------------------------------------------------------------------

Tensor matmul_last_dim(const Tensor& a, const Tensor& w) {
    if (a.rank() < 2 || w.rank() != 2)
        throw ShapeError("matmul_last_dim: need a rank>=2 and w rank 2, got " +
                         shape_str(a.shape()) + " and " + shape_str(w.shape()));
    const std::int64_t q = a.dim(a.rank() - 1);
    const std::int64_t p = a.dim(a.rank() - 2);
    if (w.dim(0) != q)
        throw ShapeError("matmul_last_dim: inner dimensions disagree: " +
                         shape_str(a.shape()) + " vs " + shape_str(w.shape()));
    const std::int64_t r = w.dim(1);
    Shape out_shape = a.shape();
    out_shape.back() = r;
    const std::int64_t blocks = a.size() / (p * q);

    auto node = make_result(out_shape, {a.node(), w.node()}, "matmul");
    const real* ad = a.data().data();
    const real* wd = w.data().data();
    real* od = node->data.data();
    for (std::int64_t blk = 0; blk < blocks; ++blk) {
        const real* A = ad + blk * p * q;
        real* O = od + blk * p * r;
        for (std::int64_t i = 0; i < p; ++i) {
            for (std::int64_t j = 0; j < r; ++j) O[i * r + j] = real(0);
            for (std::int64_t k = 0; k < q; ++k) {
                const real aik = A[i * q + k];
                const real* Wk = wd + k * r;
                for (std::int64_t j = 0; j < r; ++j) O[i * r + j] += aik * Wk[j];
            }
        }
    }
    node->backward_fn = [p, q, r, blocks](TensorNode& self) {
        auto& pa = self.parents[0];
        auto& pw = self.parents[1];
        const real* g = self.grad.data();
        if (pa->requires_grad) {
            pa->ensure_grad();
            const real* wd = pw->data.data();
            for (std::int64_t blk = 0; blk < blocks; ++blk) {
                const real* G = g + blk * p * r;
                real* dA = pa->grad.data() + blk * p * q;
                for (std::int64_t i = 0; i < p; ++i)
                    for (std::int64_t k = 0; k < q; ++k) {
                        real acc = real(0);
                        const real* Wk = wd + k * r;
                        for (std::int64_t j = 0; j < r; ++j) acc += G[i * r + j] * Wk[j];
                        dA[i * q + k] += acc;
                    }
            }
        }
        if (pw->requires_grad) {
            pw->ensure_grad();
            const real* ad = pa->data.data();
            for (std::int64_t blk = 0; blk < blocks; ++blk) {
                const real* G = g + blk * p * r;
                const real* A = ad + blk * p * q;
                for (std::int64_t k = 0; k < q; ++k)
                    for (std::int64_t i = 0; i < p; ++i) {
                        const real aik = A[i * q + k];
                        real* dWk = pw->grad.data() + k * r;
                        for (std::int64_t j = 0; j < r; ++j) dWk[j] += aik * G[i * r + j];
                    }
            }
        }
    };
    return Tensor(node);
}

// ---------------------------------------------------------------------------
// elementwise binary ops (suffix broadcast only)
// ---------------------------------------------------------------------------

namespace {

enum class BinOp { add, sub, mul, div };

Tensor binary_op(const Tensor& a, const Tensor& b, BinOp op, const char* name) {
    if (!suffix_broadcastable(a.shape(), b.shape()))
        throw ShapeError(std::string(name) + ": incompatible shapes " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
    const std::int64_t na = a.size();
    const std::int64_t nb = b.size();
    auto node = make_result(a.shape(), {a.node(), b.node()}, name);
    const real* ad = a.data().data();
    const real* bd = b.data().data();
    real* od = node->data.data();
    for (std::int64_t i = 0; i < na; ++i) {
        const real bv = bd[i % nb];
        switch (op) {
            case BinOp::add: od[i] = ad[i] + bv; break;
            case BinOp::sub: od[i] = ad[i] - bv; break;
            case BinOp::mul: od[i] = ad[i] * bv; break;
            case BinOp::div: od[i] = ad[i] / bv; break;
        }
    }
    node->backward_fn = [na, nb, op](TensorNode& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        const real* g = self.grad.data();
        const real* ad = pa->data.data();
        const real* bd = pb->data.data();
        if (pa->requires_grad) {
            pa->ensure_grad();
            real* da = pa->grad.data();
            for (std::int64_t i = 0; i < na; ++i) {
                switch (op) {
                    case BinOp::add:
                    case BinOp::sub: da[i] += g[i]; break;
                    case BinOp::mul: da[i] += g[i] * bd[i % nb]; break;
                    case BinOp::div: da[i] += g[i] / bd[i % nb]; break;
                }
            }
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            real* db = pb->grad.data();
            for (std::int64_t i = 0; i < na; ++i) {
                const std::int64_t j = i % nb;
                switch (op) {
                    case BinOp::add: db[j] += g[i]; break;
                    case BinOp::sub: db[j] -= g[i]; break;
                    case BinOp::mul: db[j] += g[i] * ad[i]; break;
                    case BinOp::div: db[j] -= g[i] * ad[i] / (bd[j] * bd[j]); break;
                }
            }
        }
    };
    return Tensor(node);
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::mul, "mul"); }
Tensor divide(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::div, "div"); }

Tensor add_scalar(const Tensor& a, real s) {
    auto node = make_result(a.shape(), {a.node()}, "add_scalar");
    const std::int64_t n = a.size();
    for (std::int64_t i = 0; i < n; ++i) node->data[i] = a.data()[i] + s;
    node->backward_fn = [n](TensorNode& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (std::int64_t i = 0; i < n; ++i) p->grad[i] += self.grad[i];
    };
    return Tensor(node);
}

Tensor mul_scalar(const Tensor& a, real s) {
    auto node = make_result(a.shape(), {a.node()}, "mul_scalar");
    const std::int64_t n = a.size();
    for (std::int64_t i = 0; i < n; ++i) node->data[i] = a.data()[i] * s;
    node->backward_fn = [n, s](TensorNode& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (std::int64_t i = 0; i < n; ++i) p->grad[i] += self.grad[i] * s;
    };
    return Tensor(node);
}

// ---------------------------------------------------------------------------
// GELU, tanh approximation:
//   gelu(x) = 0.5 x (1 + tanh( sqrt(2/pi) (x + 0.044715 x^3) ))
// The gradient is the exact derivative of this formula.
// ---------------------------------------------------------------------------

Tensor gelu(const Tensor& a) {
    static const real kC = real(0.7978845608028654); // sqrt(2/pi)
    static const real kA = real(0.044715);
    auto node = make_result(a.shape(), {a.node()}, "gelu");
    const std::int64_t n = a.size();
    const real* x = a.data().data();
    for (std::int64_t i = 0; i < n; ++i) {
        const real u = kC * (x[i] + kA * x[i] * x[i] * x[i]);
        node->data[i] = real(0.5) * x[i] * (real(1) + std::tanh(u));
    }
    node->backward_fn = [n](TensorNode& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        p->ensure_grad();
        const real* x = p->data.data();
        for (std::int64_t i = 0; i < n; ++i) {
            const real u = kC * (x[i] + kA * x[i] * x[i] * x[i]);
            const real t = std::tanh(u);
            const real sech2 = real(1) - t * t;
            const real du = kC * (real(1) + real(3) * kA * x[i] * x[i]);
            const real d = real(0.5) * (real(1) + t) + real(0.5) * x[i] * sech2 * du;
            p->grad[i] += self.grad[i] * d;
        }
    };
    return Tensor(node);
}

// ---------------------------------------------------------------------------
// softmax over the last axis, max-subtracted for stability
// ---------------------------------------------------------------------------

Tensor softmax_last_dim(const Tensor& a) {
    if (a.rank() < 1 || a.dim(a.rank() - 1) < 1)
        throw ShapeError("softmax_last_dim: bad shape " + shape_str(a.shape()));
    const std::int64_t d = a.dim(a.rank() - 1);
    const std::int64_t rows = a.size() / d;
    auto node = make_result(a.shape(), {a.node()}, "softmax");
    const real* x = a.data().data();
    real* y = node->data.data();
    for (std::int64_t r = 0; r < rows; ++r) {
        const real* xr = x + r * d;
        real* yr = y + r * d;
        real mx = xr[0];
        for (std::int64_t i = 1; i < d; ++i) mx = std::max(mx, xr[i]);
        real sum = real(0);
        for (std::int64_t i = 0; i < d; ++i) { yr[i] = std::exp(xr[i] - mx); sum += yr[i]; }
        for (std::int64_t i = 0; i < d; ++i) yr[i] /= sum;
    }
    node->backward_fn = [rows, d](TensorNode& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (std::int64_t r = 0; r < rows; ++r) {
            const real* yr = self.data.data() + r * d;
            const real* gr = self.grad.data() + r * d;
            real* dr = p->grad.data() + r * d;
            real dot = real(0);
            for (std::int64_t i = 0; i < d; ++i) dot += gr[i] * yr[i];
            for (std::int64_t i = 0; i < d; ++i) dr[i] += yr[i] * (gr[i] - dot);
        }
    };
    return Tensor(node);
}

// ---------------------------------------------------------------------------
// LayerNorm over the last axis (population variance), y = g*(x-mu)/s + b
// ---------------------------------------------------------------------------

Tensor layer_norm_last_dim(const Tensor& x, const Tensor& gamma, const Tensor& beta, real eps) {
    const std::int64_t d = x.dim(x.rank() - 1);
    if (gamma.size() != d || beta.size() != d)
        throw ShapeError("layer_norm: gamma/beta size must equal last dim " + std::to_string(d));
    const std::int64_t rows = x.size() / d;
    auto node = make_result(x.shape(), {x.node(), gamma.node(), beta.node()}, "layer_norm");
    const real* xd = x.data().data();
    const real* gd = gamma.data().data();
    const real* bd = beta.data().data();
    real* yd = node->data.data();
    // cache inv-std and xhat for backward
    auto inv_std = std::make_shared<std::vector<real>>(static_cast<std::size_t>(rows));
    auto xhat = std::make_shared<std::vector<real>>(static_cast<std::size_t>(x.size()));
    for (std::int64_t r = 0; r < rows; ++r) {
        const real* xr = xd + r * d;
        real mean = real(0);
        for (std::int64_t i = 0; i < d; ++i) mean += xr[i];
        mean /= real(d);
        real var = real(0);
        for (std::int64_t i = 0; i < d; ++i) { const real c = xr[i] - mean; var += c * c; }
        var /= real(d);
        const real is = real(1) / std::sqrt(var + eps);
        (*inv_std)[static_cast<std::size_t>(r)] = is;
        for (std::int64_t i = 0; i < d; ++i) {
            const real xh = (xr[i] - mean) * is;
            (*xhat)[static_cast<std::size_t>(r * d + i)] = xh;
            yd[r * d + i] = gd[i] * xh + bd[i];
        }
    }
    node->backward_fn = [rows, d, inv_std, xhat](TensorNode& self) {
        auto& px = self.parents[0];
        auto& pg = self.parents[1];
        auto& pb = self.parents[2];
        const real* g = self.grad.data();
        const real* gw = pg->data.data();
        if (pg->requires_grad) pg->ensure_grad();
        if (pb->requires_grad) pb->ensure_grad();
        if (px->requires_grad) px->ensure_grad();
        for (std::int64_t r = 0; r < rows; ++r) {
            const real* gr = g + r * d;
            const real* xh = xhat->data() + r * d;
            if (pg->requires_grad || pb->requires_grad) {
                for (std::int64_t i = 0; i < d; ++i) {
                    if (pg->requires_grad) pg->grad[i] += gr[i] * xh[i];
                    if (pb->requires_grad) pb->grad[i] += gr[i];
                }
            }
            if (px->requires_grad) {
                const real is = (*inv_std)[static_cast<std::size_t>(r)];
                real m1 = real(0), m2 = real(0);
                for (std::int64_t i = 0; i < d; ++i) {
                    const real gg = gr[i] * gw[i];
                    m1 += gg;
                    m2 += gg * xh[i];
                }
                m1 /= real(d);
                m2 /= real(d);
                real* dx = px->grad.data() + r * d;
                for (std::int64_t i = 0; i < d; ++i) {
                    const real gg = gr[i] * gw[i];
                    dx[i] += (gg - m1 - xh[i] * m2) * is;
                }
            }
        }
    };
    return Tensor(node);
}

// ---------------------------------------------------------------------------
// shape ops
// ---------------------------------------------------------------------------

Tensor reshape(const Tensor& a, Shape new_shape) {
    check_shape_positive(new_shape, "reshape");
    if (shape_numel(new_shape) != a.size())
        throw ShapeError("reshape: element count mismatch, " + shape_str(a.shape()) + " -> " +
                         shape_str(new_shape));
    auto node = make_result(new_shape, {a.node()}, "reshape");
    node->data = a.data();
    const std::int64_t n = a.size();
    node->backward_fn = [n](TensorNode& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (std::int64_t i = 0; i < n; ++i) p->grad[i] += self.grad[i];
    };
    return Tensor(node);
}

namespace {

std::vector<std::int64_t> row_major_strides(const Shape& s) {
    std::vector<std::int64_t> st(s.size());
    std::int64_t acc = 1;
    for (int i = static_cast<int>(s.size()) - 1; i >= 0; --i) {
        st[static_cast<std::size_t>(i)] = acc;
        acc *= s[static_cast<std::size_t>(i)];
    }
    return st;
}

// Mapping from output linear index to input linear index for a permutation.
std::vector<std::int64_t> perm_index_map(const Shape& in_shape, const std::vector<int>& perm) {
    const std::size_t r = in_shape.size();
    Shape out_shape(r);
    for (std::size_t i = 0; i < r; ++i) out_shape[i] = in_shape[static_cast<std::size_t>(perm[i])];
    auto in_strides = row_major_strides(in_shape);
    const std::int64_t n = shape_numel(in_shape);
    std::vector<std::int64_t> map(static_cast<std::size_t>(n));
    std::vector<std::int64_t> idx(r, 0);
    for (std::int64_t o = 0; o < n; ++o) {
        std::int64_t src = 0;
        for (std::size_t i = 0; i < r; ++i)
            src += idx[i] * in_strides[static_cast<std::size_t>(perm[i])];
        map[static_cast<std::size_t>(o)] = src;
        // increment multi-index over out_shape
        for (int i = static_cast<int>(r) - 1; i >= 0; --i) {
            if (++idx[static_cast<std::size_t>(i)] < out_shape[static_cast<std::size_t>(i)]) break;
            idx[static_cast<std::size_t>(i)] = 0;
        }
    }
    return map;
}

} // namespace

Tensor transpose_axes(const Tensor& a, const std::vector<int>& perm) {
    const std::size_t r = static_cast<std::size_t>(a.rank());
    if (perm.size() != r)
        throw ShapeError("transpose_axes: perm rank mismatch for " + shape_str(a.shape()));
    std::vector<bool> seen(r, false);
    for (int p : perm) {
        if (p < 0 || static_cast<std::size_t>(p) >= r || seen[static_cast<std::size_t>(p)])
            throw ShapeError("transpose_axes: invalid permutation");
        seen[static_cast<std::size_t>(p)] = true;
    }
    Shape out_shape(r);
    for (std::size_t i = 0; i < r; ++i) out_shape[i] = a.dim(perm[i]);
    auto map = std::make_shared<std::vector<std::int64_t>>(perm_index_map(a.shape(), perm));
    auto node = make_result(out_shape, {a.node()}, "transpose");
    const std::int64_t n = a.size();
    for (std::int64_t o = 0; o < n; ++o)
        node->data[static_cast<std::size_t>(o)] = a.data()[static_cast<std::size_t>((*map)[static_cast<std::size_t>(o)])];
    node->backward_fn = [n, map](TensorNode& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (std::int64_t o = 0; o < n; ++o)
            p->grad[static_cast<std::size_t>((*map)[static_cast<std::size_t>(o)])] += self.grad[static_cast<std::size_t>(o)];
    };
    return Tensor(node);
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw ShapeError("concat: empty input list");
    const auto& s0 = parts[0].shape();
    const std::size_t r = s0.size();
    if (axis < 0 || static_cast<std::size_t>(axis) >= r)
        throw ShapeError("concat: bad axis");
    Shape out_shape = s0;
    std::int64_t axis_total = 0;
    for (const auto& t : parts) {
        if (t.shape().size() != r) throw ShapeError("concat: rank mismatch");
        for (std::size_t i = 0; i < r; ++i) {
            if (i == static_cast<std::size_t>(axis)) continue;
            if (t.shape()[i] != s0[i])
                throw ShapeError("concat: off-axis shape mismatch " + shape_str(t.shape()) +
                                 " vs " + shape_str(s0));
        }
        axis_total += t.dim(axis);
    }
    out_shape[static_cast<std::size_t>(axis)] = axis_total;

    std::int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= s0[static_cast<std::size_t>(i)];
    for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < r; ++i) inner *= s0[i];

    std::vector<NodePtr> parents;
    parents.reserve(parts.size());
    for (const auto& t : parts) parents.push_back(t.node());
    auto node = make_result(out_shape, std::move(parents), "concat");

    std::vector<std::int64_t> axis_sizes;
    for (const auto& t : parts) axis_sizes.push_back(t.dim(axis));
    real* od = node->data.data();
    for (std::int64_t o = 0; o < outer; ++o) {
        std::int64_t dst_axis = 0;
        for (std::size_t pi = 0; pi < parts.size(); ++pi) {
            const std::int64_t ai = axis_sizes[pi];
            const real* src = parts[pi].data().data() + o * ai * inner;
            std::copy(src, src + ai * inner, od + (o * axis_total + dst_axis) * inner);
            dst_axis += ai;
        }
    }
    node->backward_fn = [outer, inner, axis_total, axis_sizes](TensorNode& self) {
        for (std::int64_t o = 0; o < outer; ++o) {
            std::int64_t src_axis = 0;
            for (std::size_t pi = 0; pi < self.parents.size(); ++pi) {
                const std::int64_t ai = axis_sizes[pi];
                auto& p = self.parents[pi];
                if (p->requires_grad) {
                    p->ensure_grad();
                    const real* g = self.grad.data() + (o * axis_total + src_axis) * inner;
                    real* dst = p->grad.data() + o * ai * inner;
                    for (std::int64_t i = 0; i < ai * inner; ++i) dst[i] += g[i];
                }
                src_axis += ai;
            }
        }
    };
    return Tensor(node);
}

Tensor slice(const Tensor& a, int axis, std::int64_t begin, std::int64_t end) {
    const std::size_t r = static_cast<std::size_t>(a.rank());
    if (axis < 0 || static_cast<std::size_t>(axis) >= r) throw ShapeError("slice: bad axis");
    const std::int64_t len = a.dim(axis);
    if (begin < 0 || end > len || begin >= end)
        throw ShapeError("slice: bad range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") for axis length " + std::to_string(len));
    Shape out_shape = a.shape();
    out_shape[static_cast<std::size_t>(axis)] = end - begin;
    std::int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= a.dim(i);
    for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < r; ++i) inner *= a.shape()[i];
    const std::int64_t span = end - begin;

    auto node = make_result(out_shape, {a.node()}, "slice");
    for (std::int64_t o = 0; o < outer; ++o) {
        const real* src = a.data().data() + (o * len + begin) * inner;
        std::copy(src, src + span * inner, node->data.data() + o * span * inner);
    }
    node->backward_fn = [outer, inner, len, begin, span](TensorNode& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (std::int64_t o = 0; o < outer; ++o) {
            const real* g = self.grad.data() + o * span * inner;
            real* dst = p->grad.data() + (o * len + begin) * inner;
            for (std::int64_t i = 0; i < span * inner; ++i) dst[i] += g[i];
        }
    };
    return Tensor(node);
}

Tensor sum_all(const Tensor& a) {
    auto node = make_result({1}, {a.node()}, "sum_all");
    real acc = real(0);
    for (real v : a.data()) acc += v;
    node->data[0] = acc;
    const std::int64_t n = a.size();
    node->backward_fn = [n](TensorNode& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        p->ensure_grad();
        const real g = self.grad[0];
        for (std::int64_t i = 0; i < n; ++i) p->grad[i] += g;
    };
    return Tensor(node);
}

Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids) {
    if (table.rank() != 2) throw ShapeError("embedding_lookup: table must be rank 2");
    const std::int64_t rows = table.dim(0);
    const std::int64_t d = table.dim(1);
    for (int id : ids) {
        if (id < 0 || id >= rows)
            throw ShapeError("embedding_lookup: id " + std::to_string(id) + " out of range");
    }
    auto node = make_result({static_cast<std::int64_t>(ids.size()), d}, {table.node()}, "embed");
    for (std::size_t b = 0; b < ids.size(); ++b) {
        const real* src = table.data().data() + static_cast<std::int64_t>(ids[b]) * d;
        std::copy(src, src + d, node->data.data() + static_cast<std::int64_t>(b) * d);
    }
    auto ids_copy = std::make_shared<std::vector<int>>(ids);
    node->backward_fn = [d, ids_copy](TensorNode& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (std::size_t b = 0; b < ids_copy->size(); ++b) {
            const real* g = self.grad.data() + static_cast<std::int64_t>(b) * d;
            real* dst = p->grad.data() + static_cast<std::int64_t>((*ids_copy)[b]) * d;
            for (std::int64_t i = 0; i < d; ++i) dst[i] += g[i];
        }
    };
    return Tensor(node);
}

// ---------------------------------------------------------------------------
// dropout (counter-based mask)
// ---------------------------------------------------------------------------

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

} // namespace

double counter_uniform(std::uint64_t seed, std::uint64_t call_id, std::uint64_t index) {
    std::uint64_t h = splitmix64(seed ^ splitmix64(call_id ^ splitmix64(index)));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

Tensor dropout(const Tensor& a, real rate, bool training, std::uint64_t seed, std::uint64_t call_id) {
    if (rate < real(0) || rate >= real(1))
        throw ContractError("dropout: rate must be in [0,1)");
    if (!training || rate == real(0)) return a;
    const std::int64_t n = a.size();
    auto mask = std::make_shared<std::vector<real>>(static_cast<std::size_t>(n));
    const real keep_scale = real(1) / (real(1) - rate);
    auto node = make_result(a.shape(), {a.node()}, "dropout");
    for (std::int64_t i = 0; i < n; ++i) {
        const bool keep = counter_uniform(seed, call_id, static_cast<std::uint64_t>(i)) >= static_cast<double>(rate);
        const real m = keep ? keep_scale : real(0);
        (*mask)[static_cast<std::size_t>(i)] = m;
        node->data[static_cast<std::size_t>(i)] = a.data()[static_cast<std::size_t>(i)] * m;
    }
    node->backward_fn = [n, mask](TensorNode& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (std::int64_t i = 0; i < n; ++i)
            p->grad[static_cast<std::size_t>(i)] += self.grad[static_cast<std::size_t>(i)] * (*mask)[static_cast<std::size_t>(i)];
    };
    return Tensor(node);
}

// ---------------------------------------------------------------------------
// backward sweep
// ---------------------------------------------------------------------------

void backward(const Tensor& loss) {
    if (loss.size() != 1)
        throw ContractError("backward: loss must be a scalar, got " + shape_str(loss.shape()));
    using detail::TensorNode;
    // iterative post-order DFS -> topological order (parents before children
    // in `order` reversed)
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> visited;
    struct Frame { TensorNode* node; std::size_t next_parent; };
    std::vector<Frame> stack;
    stack.push_back({loss.node().get(), 0});
    visited.insert(loss.node().get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.node->parents.size()) {
            TensorNode* p = f.node->parents[f.next_parent++].get();
            if (!visited.count(p) && p->requires_grad) {
                visited.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }
    auto* root = loss.node().get();
    root->ensure_grad();
    root->grad[0] += real(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* n = *it;
        if (n->backward_fn && n->requires_grad) {
            n->ensure_grad();
            n->backward_fn(*n);
        }
    }
}

} // namespace ttm
