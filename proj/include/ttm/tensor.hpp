#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ttm/errors.hpp"

namespace ttm {

// Element type. Double is the default; builds may opt into float32 with
// -DTTM_REAL32 for speed. Gradient checking is only meaningful in double.
#ifdef TTM_REAL32
using real = float;
#else
using real = double;
#endif

using Shape = std::vector<std::int64_t>;

std::string shape_str(const Shape& s);
std::int64_t shape_numel(const Shape& s);

namespace detail {

struct TensorNode {
    Shape shape;
    std::vector<real> data;
    std::vector<real> grad; // allocated lazily, same length as data
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward_fn; // reads grad, accumulates into parents
    const char* op = "leaf";

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), real(0));
    }
};

} // namespace detail

// A dense real tensor participating in a dynamic compute graph.
// Value-semantics handle: copies share the underlying node.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, real fill = real(0), bool requires_grad = false);
    Tensor(Shape shape, std::vector<real> data, bool requires_grad = false);

    bool valid() const { return n_ != nullptr; }
    const Shape& shape() const { return n_->shape; }
    int rank() const { return static_cast<int>(n_->shape.size()); }
    std::int64_t dim(int axis) const { return n_->shape[static_cast<std::size_t>(axis)]; }
    std::int64_t size() const { return static_cast<std::int64_t>(n_->data.size()); }

    std::vector<real>& data() { return n_->data; }
    const std::vector<real>& data() const { return n_->data; }
    bool has_grad() const { return !n_->grad.empty(); }
    std::vector<real>& grad() { n_->ensure_grad(); return n_->grad; }
    const std::vector<real>& grad() const { const_cast<detail::TensorNode*>(n_.get())->ensure_grad(); return n_->grad; }

    bool requires_grad() const { return n_->requires_grad; }
    Tensor& set_requires_grad(bool v) { n_->requires_grad = v; return *this; }
    void zero_grad() { if (n_) n_->grad.assign(n_->data.size(), real(0)); }

    // Leaf constructor helpers
    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    static Tensor scalar(real v) { return Tensor({1}, {v}); }

    // Detached copy of the values (new leaf, no graph history).
    Tensor detached() const;

    std::shared_ptr<detail::TensorNode> node() const { return n_; }
    explicit Tensor(std::shared_ptr<detail::TensorNode> n) : n_(std::move(n)) {}

private:
    std::shared_ptr<detail::TensorNode> n_;
};

// ---------------------------------------------------------------------------
// Ops. All return fresh tensors wired into the graph; gradients flow to every
// input with requires_grad set.
// ---------------------------------------------------------------------------

Tensor matmul_last_dim(const Tensor& a, const Tensor& w);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor divide(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, real s);
Tensor mul_scalar(const Tensor& a, real s);

Tensor gelu(const Tensor& a); // tanh approximation, see tensor.cpp
Tensor softmax_last_dim(const Tensor& a);
Tensor layer_norm_last_dim(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                           real eps = real(1e-5));

Tensor reshape(const Tensor& a, Shape new_shape);
Tensor transpose_axes(const Tensor& a, const std::vector<int>& perm);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& a, int axis, std::int64_t begin, std::int64_t end);

Tensor sum_all(const Tensor& a); // -> scalar [1]
Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids); // [R x d] -> [b x d]

// Inverted dropout with a counter-based generator: the mask depends only on
// (seed, call_id, element index), so runs are reproducible. rate 0 or
// training=false returns the input unchanged.
Tensor dropout(const Tensor& a, real rate, bool training, std::uint64_t seed,
               std::uint64_t call_id);

// Reverse-mode sweep from a scalar loss. Each reachable node's backward runs
// exactly once (topological order). Grads accumulate across calls until
// zero_grad is invoked on the leaves.
void backward(const Tensor& loss);

// Uniform value in [0,1) from a counter-based hash; used by dropout and
// exposed for test determinism checks.
double counter_uniform(std::uint64_t seed, std::uint64_t call_id, std::uint64_t index);

} // namespace ttm
