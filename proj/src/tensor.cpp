#include "icas/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace icas::num {

namespace {
bool g_finite_checks = true;

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

void check_finite(const char* where, const std::vector<double>& v) {
    if (!g_finite_checks) return;
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw NumericError(std::string(where) + ": non-finite value " +
                               std::to_string(x));
        }
    }
}

std::shared_ptr<detail::Node> make_result(std::vector<std::size_t> shape,
                                          std::vector<double> value,
                                          std::vector<std::shared_ptr<detail::Node>> parents,
                                          std::function<void(detail::Node&)> backprop) {
    auto n = std::make_shared<detail::Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    bool needs_grad = false;
    for (const auto& p : parents)
        if (p->requires_grad) needs_grad = true;
    n->requires_grad = needs_grad;
    n->leaf = false;
    if (needs_grad) {
        n->parents = std::move(parents);
        n->backprop = std::move(backprop);
    }
    return n;
}

// b may equal a's shape, or be a row ({d} or {1,d}) broadcast over a's rows
// ({p,d}). Returns true in the broadcast case.
bool broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() == b.shape()) return false;
    bool b_is_row = (b.rank() == 1 && b.size() > 0) ||
                    (b.rank() == 2 && b.rows() == 1);
    std::size_t bw = b.rank() == 1 ? b.shape()[0] : b.cols();
    if (a.rank() == 2 && b_is_row && a.cols() == bw) return true;
    throw ShapeError(std::string(op) + ": incompatible shapes " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}
}  // namespace

void set_finite_checks(bool enabled) { g_finite_checks = enabled; }
bool finite_checks_enabled() { return g_finite_checks; }

std::string shape_str(const std::vector<std::size_t>& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

std::vector<double>& detail::Node::grad_buf() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data,
               bool requires_grad) {
    if (shape_product(shape) != data.size()) {
        throw ShapeError("tensor: shape " + shape_str(shape) + " expects " +
                         std::to_string(shape_product(shape)) + " elements, got " +
                         std::to_string(data.size()));
    }
    check_finite("tensor", data);
    n_ = std::make_shared<detail::Node>();
    n_->shape = std::move(shape);
    n_->value = std::move(data);
    n_->requires_grad = requires_grad;
    n_->leaf = true;
}

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
    std::vector<double> d(shape_product(shape), 0.0);
    return Tensor(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::full(std::vector<std::size_t> shape, double v, bool requires_grad) {
    std::vector<double> d(shape_product(shape), v);
    return Tensor(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

const std::vector<std::size_t>& Tensor::shape() const { return n_->shape; }
std::size_t Tensor::size() const { return n_->value.size(); }

std::size_t Tensor::rows() const {
    if (rank() != 2) throw ShapeError("rows(): tensor is not rank-2");
    return shape()[0];
}
std::size_t Tensor::cols() const {
    if (rank() != 2) throw ShapeError("cols(): tensor is not rank-2");
    return shape()[1];
}

const std::vector<double>& Tensor::values() const { return n_->value; }

double Tensor::at(std::size_t r, std::size_t c) const {
    return n_->value[r * cols() + c];
}

double Tensor::item() const {
    if (size() != 1)
        throw ShapeError("item(): tensor has " + std::to_string(size()) + " elements");
    return n_->value[0];
}

bool Tensor::requires_grad() const { return n_->requires_grad; }

void Tensor::set_requires_grad(bool enabled) {
    if (!n_->leaf) throw NumericError("set_requires_grad: not a leaf tensor");
    n_->requires_grad = enabled;
    if (!enabled) n_->grad.clear();
}

bool Tensor::is_leaf() const { return n_->leaf; }

bool Tensor::has_grad() const { return !n_->grad.empty(); }

const std::vector<double>& Tensor::grad() const {
    if (n_->grad.empty())
        throw NumericError("grad(): no gradient accumulated on this tensor");
    return n_->grad;
}

void Tensor::zero_grad() const { n_->grad.clear(); }

std::vector<double>& Tensor::mutable_values() {
    if (!n_->leaf) throw NumericError("mutable_values: not a leaf tensor");
    return n_->value;
}

Tensor Tensor::from_node(std::shared_ptr<detail::Node> n) {
    Tensor t;
    t.n_ = std::move(n);
    return t;
}

// ---- Tape ----

Tape::Tape(const Tensor& root) : root_(root.node()) {
    if (root.size() != 1)
        throw ShapeError("Tape: root must be scalar, got " + shape_str(root.shape()));
    // Post-order DFS; order_ holds parents before children.
    std::unordered_set<detail::Node*> seen;
    std::vector<std::shared_ptr<detail::Node>> post;
    std::function<void(const std::shared_ptr<detail::Node>&)> dfs =
        [&](const std::shared_ptr<detail::Node>& n) {
            if (seen.count(n.get())) return;
            seen.insert(n.get());
            for (const auto& p : n->parents) dfs(p);
            post.push_back(n);
        };
    dfs(root_);
    order_ = std::move(post);
}

void Tape::backward() {
    for (auto& n : order_)
        if (!n->leaf) n->grad.clear();
    root_->grad_buf()[0] = 1.0;
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
        auto& n = **it;
        if (n.backprop && !n.grad.empty()) n.backprop(n);
    }
}

void backward(const Tensor& loss) { Tape(loss).backward(); }

// ---- operations ----

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
        throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    }
    const std::size_t p = a.rows(), q = a.cols(), r = b.cols();
    std::vector<double> out(p * r, 0.0);
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t k = 0; k < q; ++k) {
            const double aik = av[i * q + k];
            for (std::size_t j = 0; j < r; ++j)
                out[i * r + j] += aik * bv[k * r + j];
        }
    check_finite("matmul", out);
    auto an = a.node(), bn = b.node();
    auto node = make_result(
        {p, r}, std::move(out), {an, bn},
        [an, bn, p, q, r](detail::Node& n) {
            const auto& g = n.grad;
            if (an->requires_grad) {
                auto& ga = an->grad_buf();
                const auto& bv = bn->value;
                for (std::size_t i = 0; i < p; ++i)
                    for (std::size_t k = 0; k < q; ++k) {
                        double acc = 0.0;
                        for (std::size_t j = 0; j < r; ++j)
                            acc += g[i * r + j] * bv[k * r + j];
                        ga[i * q + k] += acc;
                    }
            }
            if (bn->requires_grad) {
                auto& gb = bn->grad_buf();
                const auto& av = an->value;
                for (std::size_t k = 0; k < q; ++k)
                    for (std::size_t j = 0; j < r; ++j) {
                        double acc = 0.0;
                        for (std::size_t i = 0; i < p; ++i)
                            acc += av[i * q + k] * g[i * r + j];
                        gb[k * r + j] += acc;
                    }
            }
        });
    return Tensor::from_node(node);
}

Tensor transpose(const Tensor& m) {
    if (m.rank() != 2) throw ShapeError("transpose: expects rank-2, got " +
                                        shape_str(m.shape()));
    const std::size_t p = m.rows(), q = m.cols();
    std::vector<double> out(p * q);
    const auto& v = m.values();
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < q; ++j) out[j * p + i] = v[i * q + j];
    auto mn = m.node();
    auto node = make_result({q, p}, std::move(out), {mn},
                            [mn, p, q](detail::Node& n) {
                                auto& gm = mn->grad_buf();
                                for (std::size_t i = 0; i < p; ++i)
                                    for (std::size_t j = 0; j < q; ++j)
                                        gm[i * q + j] += n.grad[j * p + i];
                            });
    return Tensor::from_node(node);
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) { return matmul(a, transpose(b)); }

Tensor softmax_rows(const Tensor& x) {
    if (x.rank() != 2) throw ShapeError("softmax_rows: expects rank-2, got " +
                                        shape_str(x.shape()));
    check_finite("softmax_rows input", x.values());
    const std::size_t p = x.rows(), q = x.cols();
    std::vector<double> out(p * q);
    const auto& v = x.values();
    for (std::size_t i = 0; i < p; ++i) {
        double mx = v[i * q];
        for (std::size_t j = 1; j < q; ++j) mx = std::max(mx, v[i * q + j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < q; ++j) {
            out[i * q + j] = std::exp(v[i * q + j] - mx);
            denom += out[i * q + j];
        }
        for (std::size_t j = 0; j < q; ++j) out[i * q + j] /= denom;
    }
    auto xn = x.node();
    auto node = make_result(
        {p, q}, std::move(out), {xn},
        [xn, p, q](detail::Node& n) {
            auto& gx = xn->grad_buf();
            const auto& y = n.value;
            for (std::size_t i = 0; i < p; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < q; ++j)
                    dot += n.grad[i * q + j] * y[i * q + j];
                for (std::size_t j = 0; j < q; ++j)
                    gx[i * q + j] += y[i * q + j] * (n.grad[i * q + j] - dot);
            }
        });
    return Tensor::from_node(node);
}

Tensor sigmoid(const Tensor& x) {
    check_finite("sigmoid input", x.values());
    std::vector<double> out(x.size());
    const auto& v = x.values();
    for (std::size_t i = 0; i < v.size(); ++i)
        out[i] = v[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-v[i]))
                             : std::exp(v[i]) / (1.0 + std::exp(v[i]));
    auto xn = x.node();
    auto node = make_result(x.shape(), std::move(out), {xn},
                            [xn](detail::Node& n) {
                                auto& gx = xn->grad_buf();
                                for (std::size_t i = 0; i < n.value.size(); ++i)
                                    gx[i] += n.grad[i] * n.value[i] * (1.0 - n.value[i]);
                            });
    return Tensor::from_node(node);
}

namespace {
// Shared core for add/sub/mul with optional row broadcast of b.
enum class EwKind { Add, Sub, Mul };

Tensor elementwise(EwKind kind, const Tensor& a, const Tensor& b, const char* name) {
    const bool bcast = broadcast_kind(a, b, name);
    const std::size_t n_rows = bcast ? a.rows() : 1;
    const std::size_t width = bcast ? a.cols() : a.size();
    std::vector<double> out(a.size());
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < n_rows; ++i)
        for (std::size_t j = 0; j < width; ++j) {
            const std::size_t ai = i * width + j;
            const double bj = bv[bcast ? j : ai];
            switch (kind) {
                case EwKind::Add: out[ai] = av[ai] + bj; break;
                case EwKind::Sub: out[ai] = av[ai] - bj; break;
                case EwKind::Mul: out[ai] = av[ai] * bj; break;
            }
        }
    check_finite(name, out);
    auto an = a.node(), bn = b.node();
    auto node = make_result(
        a.shape(), std::move(out), {an, bn},
        [an, bn, kind, bcast, n_rows, width](detail::Node& n) {
            const auto& g = n.grad;
            if (an->requires_grad) {
                auto& ga = an->grad_buf();
                for (std::size_t i = 0; i < n_rows; ++i)
                    for (std::size_t j = 0; j < width; ++j) {
                        const std::size_t ai = i * width + j;
                        const double bj = bn->value[bcast ? j : ai];
                        ga[ai] += kind == EwKind::Mul ? g[ai] * bj : g[ai];
                    }
            }
            if (bn->requires_grad) {
                auto& gb = bn->grad_buf();
                for (std::size_t i = 0; i < n_rows; ++i)
                    for (std::size_t j = 0; j < width; ++j) {
                        const std::size_t ai = i * width + j;
                        const std::size_t bi = bcast ? j : ai;
                        double d = g[ai];
                        if (kind == EwKind::Sub) d = -d;
                        if (kind == EwKind::Mul) d = g[ai] * an->value[ai];
                        gb[bi] += d;
                    }
            }
        });
    return Tensor::from_node(node);
}
}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(EwKind::Add, a, b, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(EwKind::Sub, a, b, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(EwKind::Mul, a, b, "mul"); }

Tensor scale(const Tensor& a, double c) {
    if (!std::isfinite(c)) throw NumericError("scale: non-finite factor");
    std::vector<double> out(a.size());
    const auto& av = a.values();
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * c;
    auto an = a.node();
    auto node = make_result(a.shape(), std::move(out), {an},
                            [an, c](detail::Node& n) {
                                auto& ga = an->grad_buf();
                                for (std::size_t i = 0; i < n.grad.size(); ++i)
                                    ga[i] += n.grad[i] * c;
                            });
    return Tensor::from_node(node);
}

Tensor reshape(const Tensor& a, std::vector<std::size_t> shape) {
    if (shape_product(shape) != a.size()) {
        throw ShapeError("reshape: " + shape_str(a.shape()) + " -> " +
                         shape_str(shape) + " changes element count");
    }
    auto an = a.node();
    auto node = make_result(std::move(shape), a.values(), {an},
                            [an](detail::Node& n) {
                                auto& ga = an->grad_buf();
                                for (std::size_t i = 0; i < n.grad.size(); ++i)
                                    ga[i] += n.grad[i];
                            });
    return Tensor::from_node(node);
}

Tensor sum(const Tensor& a) {
    double s = std::accumulate(a.values().begin(), a.values().end(), 0.0);
    check_finite("sum", {s});
    auto an = a.node();
    auto node = make_result({1}, {s}, {an},
                            [an](detail::Node& n) {
                                auto& ga = an->grad_buf();
                                for (double& g : ga) g += n.grad[0];
                            });
    return Tensor::from_node(node);
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

}  // namespace icas::num
