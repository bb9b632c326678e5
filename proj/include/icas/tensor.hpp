#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace icas::num {

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Toggles NaN/Inf detection at operation boundaries. On by default; the
// likeliest failure sites are softmax/sigmoid saturation.
void set_finite_checks(bool enabled);
bool finite_checks_enabled();

namespace detail {

struct Node {
    std::vector<std::size_t> shape;
    std::vector<double> value;
    std::vector<double> grad;  // sized lazily, same length as value
    bool requires_grad = false;
    bool leaf = true;
    std::vector<std::shared_ptr<Node>> parents;
    // Accumulates this node's grad into its parents' grads.
    std::function<void(Node&)> backprop;

    std::size_t size() const { return value.size(); }
    std::vector<double>& grad_buf();
};

}  // namespace detail

// Dense row-major f64 tensor. Values are immutable once created except for
// leaf tensors (parameters), which expose mutable_values() for optimizer
// updates and finite-difference probing. Copies share the underlying node.
class Tensor {
public:
    Tensor() = default;
    Tensor(std::vector<std::size_t> shape, std::vector<double> data,
           bool requires_grad = false);

    static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
    static Tensor full(std::vector<std::size_t> shape, double v,
                       bool requires_grad = false);
    static Tensor scalar(double v);

    bool defined() const { return n_ != nullptr; }
    const std::vector<std::size_t>& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t size() const;
    std::size_t rows() const;  // rank-2 only
    std::size_t cols() const;  // rank-2 only

    const std::vector<double>& values() const;
    double operator[](std::size_t i) const { return values()[i]; }
    double at(std::size_t r, std::size_t c) const;
    double item() const;  // single-element tensors

    bool requires_grad() const;
    void set_requires_grad(bool enabled);  // leaf tensors only
    bool is_leaf() const;

    bool has_grad() const;
    const std::vector<double>& grad() const;
    void zero_grad() const;

    // Leaf-only in-place access (optimizer steps, FD perturbation).
    std::vector<double>& mutable_values();

    std::shared_ptr<detail::Node> node() const { return n_; }
    static Tensor from_node(std::shared_ptr<detail::Node> n);

private:
    std::shared_ptr<detail::Node> n_;
};

// Reverse pass over the graph rooted at a scalar loss. Nodes are visited in
// reverse topological order; every requires_grad leaf reachable from the root
// ends up with a populated grad.
class Tape {
public:
    explicit Tape(const Tensor& root);
    void backward();
    std::size_t num_nodes() const { return order_.size(); }

private:
    std::vector<std::shared_ptr<detail::Node>> order_;  // parents before children
    std::shared_ptr<detail::Node> root_;
};

void backward(const Tensor& loss);

// ---- primitive operations (all with backward rules) ----

Tensor matmul(const Tensor& a, const Tensor& b);
// a * transpose(b); used for query-key score matrices.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& m);

Tensor softmax_rows(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// add/mul accept equal shapes, or b as a rank-1 (or 1xd) row broadcast over
// a's rows. Broadcast backward sums over the broadcast axis. Anything wider
// than row-over-matrix is a shape error.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);

Tensor reshape(const Tensor& a, std::vector<std::size_t> shape);  // copies
Tensor sum(const Tensor& a);   // -> shape {1}
Tensor mean(const Tensor& a);  // -> shape {1}

std::string shape_str(const std::vector<std::size_t>& s);

}  // namespace icas::num
