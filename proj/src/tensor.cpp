#include "wappo/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

namespace wappo {

namespace {

thread_local bool g_grad_enabled = true;

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const EMat>;
using MMap = Eigen::Map<EMat>;

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

void check_shape(const std::vector<std::size_t>& shape, const std::vector<double>& data) {
    if (shape.empty()) throw TensorError("tensor shape must have rank >= 1");
    for (std::size_t d : shape)
        if (d == 0) throw TensorError("tensor shape dimensions must be >= 1");
    if (shape_product(shape) != data.size())
        throw TensorError("tensor data length does not match shape");
}

void check_finite(const Node& n) {
    for (double v : n.value)
        if (!std::isfinite(v))
            throw TensorError("non-finite value produced by op '" + n.op + "'");
}

std::shared_ptr<Node> make_node(std::string op, std::vector<std::shared_ptr<Node>> parents,
                                std::vector<std::size_t> shape, std::vector<double> value,
                                std::function<void(Node&)> bp) {
    auto n = std::make_shared<Node>();
    n->op = std::move(op);
    n->shape = std::move(shape);
    n->value = std::move(value);
    bool req = false;
    if (g_grad_enabled)
        for (auto& p : parents)
            if (p->requires_grad) req = true;
    n->requires_grad = req;
    if (req) {
        n->parents = std::move(parents);
        n->backprop = std::move(bp);
    }
    check_finite(*n);
    return n;
}

std::vector<double>& grad_of(Node& n) {
    if (n.grad.size() != n.value.size()) n.grad.assign(n.value.size(), 0.0);
    return n.grad;
}

}  // namespace

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }
bool grad_enabled() { return g_grad_enabled; }

Tensor Tensor::constant(std::vector<std::size_t> shape, std::vector<double> data) {
    check_shape(shape, data);
    auto n = std::make_shared<Node>();
    n->op = "constant";
    n->shape = std::move(shape);
    n->value = std::move(data);
    return Tensor(n);
}

Tensor Tensor::scalar(double v) { return constant({1}, {v}); }

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
    std::vector<double> d(shape_product(shape), 0.0);
    return constant(std::move(shape), std::move(d));
}

Tensor Tensor::parameter(const std::string& name, std::vector<std::size_t> shape,
                         std::vector<double> data) {
    check_shape(shape, data);
    auto n = std::make_shared<Node>();
    n->op = "parameter";
    n->name = name;
    n->is_param = true;
    n->requires_grad = true;
    n->shape = std::move(shape);
    n->value = std::move(data);
    return Tensor(n);
}

const std::vector<std::size_t>& Tensor::shape() const { return node_->shape; }
const std::vector<double>& Tensor::data() const { return node_->value; }
std::vector<double>& Tensor::mutable_data() { return node_->value; }
std::size_t Tensor::size() const { return node_->value.size(); }

double Tensor::item() const {
    if (size() != 1) throw TensorError("item() requires a scalar tensor");
    return node_->value[0];
}

std::size_t Tensor::rows() const { return node_->shape.size() == 1 ? 1 : node_->shape[0]; }
std::size_t Tensor::cols() const {
    return node_->shape.size() == 1 ? node_->shape[0] : node_->shape[1];
}

namespace ops {

namespace {

// Elementwise unary helper.
Tensor unary(const char* name, const Tensor& x, double (*f)(double),
             std::function<double(double, double)> df) {
    std::vector<double> out(x.size());
    const auto& xv = x.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
    auto xp = x.node();
    return Tensor(make_node(name, {xp}, x.shape(), std::move(out), [xp, df](Node& n) {
        if (!xp->requires_grad) return;
        auto& g = grad_of(*xp);
        for (std::size_t i = 0; i < n.value.size(); ++i)
            g[i] += n.grad[i] * df(xp->value[i], n.value[i]);
    }));
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw TensorError(std::string("shape mismatch in op '") + op + "'");
}

// Elementwise binary with scalar broadcast on either side.
Tensor binary(const char* name, const Tensor& a, const Tensor& b,
              double (*f)(double, double),
              void (*df)(double ga, double av, double bv, double& da, double& db)) {
    bool a_scalar = a.size() == 1, b_scalar = b.size() == 1;
    if (!a_scalar && !b_scalar) require_same_shape(name, a, b);
    const Tensor& big = b_scalar ? a : b;
    std::size_t n = big.size();
    std::vector<double> out(n);
    const auto& av = a.data();
    const auto& bv = b.data();
    for (std::size_t i = 0; i < n; ++i)
        out[i] = f(av[a_scalar ? 0 : i], bv[b_scalar ? 0 : i]);
    auto ap = a.node(), bp = b.node();
    return Tensor(make_node(name, {ap, bp}, big.shape(), std::move(out),
                            [ap, bp, a_scalar, b_scalar, df](Node& nd) {
        std::size_t n = nd.value.size();
        std::vector<double>* ga = ap->requires_grad ? &grad_of(*ap) : nullptr;
        std::vector<double>* gb = bp->requires_grad ? &grad_of(*bp) : nullptr;
        for (std::size_t i = 0; i < n; ++i) {
            double da = 0.0, db = 0.0;
            df(nd.grad[i], ap->value[a_scalar ? 0 : i], bp->value[b_scalar ? 0 : i], da, db);
            if (ga) (*ga)[a_scalar ? 0 : i] += da;
            if (gb) (*gb)[b_scalar ? 0 : i] += db;
        }
    }));
}

}  // namespace

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (w.shape().size() != 2) throw TensorError("affine: weight must be rank-2");
    std::size_t n = x.rows(), d = x.cols(), k = w.shape()[1];
    if (w.shape()[0] != d) throw TensorError("affine: input/weight dimension mismatch");
    if (b.size() != k) throw TensorError("affine: bias dimension mismatch");

    std::vector<double> out(n * k);
    {
        CMap xm(x.data().data(), n, d);
        CMap wm(w.data().data(), d, k);
        MMap om(out.data(), n, k);
        om.noalias() = xm * wm;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < k; ++j) out[i * k + j] += b.data()[j];
    }
    std::vector<std::size_t> oshape =
        x.shape().size() == 1 ? std::vector<std::size_t>{k} : std::vector<std::size_t>{n, k};
    auto xp = x.node(), wp = w.node(), bp = b.node();
    return Tensor(make_node("affine", {xp, wp, bp}, std::move(oshape), std::move(out),
                            [xp, wp, bp, n, d, k](Node& nd) {
        CMap gy(nd.grad.data(), n, k);
        if (xp->requires_grad) {
            CMap wm(wp->value.data(), d, k);
            MMap gx(grad_of(*xp).data(), n, d);
            gx.noalias() += gy * wm.transpose();
        }
        if (wp->requires_grad) {
            CMap xm(xp->value.data(), n, d);
            MMap gw(grad_of(*wp).data(), d, k);
            gw.noalias() += xm.transpose() * gy;
        }
        if (bp->requires_grad) {
            auto& gb = grad_of(*bp);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < k; ++j) gb[j] += nd.grad[i * k + j];
        }
    }));
}

Tensor leaky_relu(const Tensor& x, double slope) {
    std::vector<double> out(x.size());
    const auto& xv = x.data();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = xv[i] >= 0.0 ? xv[i] : slope * xv[i];
    auto xp = x.node();
    return Tensor(make_node("leaky_relu", {xp}, x.shape(), std::move(out), [xp, slope](Node& nd) {
        if (!xp->requires_grad) return;
        auto& g = grad_of(*xp);
        for (std::size_t i = 0; i < nd.value.size(); ++i)
            g[i] += nd.grad[i] * (xp->value[i] >= 0.0 ? 1.0 : slope);
    }));
}

Tensor tanh(const Tensor& x) {
    return unary("tanh", x, [](double v) { return std::tanh(v); },
                 [](double, double y) { return 1.0 - y * y; });
}

Tensor log_softmax(const Tensor& x) {
    std::size_t n = x.rows(), k = x.cols();
    std::vector<double> out(n * k);
    const auto& xv = x.data();
    for (std::size_t i = 0; i < n; ++i) {
        double m = xv[i * k];
        for (std::size_t j = 1; j < k; ++j) m = std::max(m, xv[i * k + j]);
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) s += std::exp(xv[i * k + j] - m);
        double lse = m + std::log(s);
        for (std::size_t j = 0; j < k; ++j) out[i * k + j] = xv[i * k + j] - lse;
    }
    auto xp = x.node();
    return Tensor(make_node("log_softmax", {xp}, x.shape(), std::move(out), [xp, n, k](Node& nd) {
        if (!xp->requires_grad) return;
        auto& g = grad_of(*xp);
        for (std::size_t i = 0; i < n; ++i) {
            double rowsum = 0.0;
            for (std::size_t j = 0; j < k; ++j) rowsum += nd.grad[i * k + j];
            for (std::size_t j = 0; j < k; ++j)
                g[i * k + j] += nd.grad[i * k + j] - std::exp(nd.value[i * k + j]) * rowsum;
        }
    }));
}

Tensor mean(const Tensor& x) {
    double s = std::accumulate(x.data().begin(), x.data().end(), 0.0);
    std::size_t n = x.size();
    auto xp = x.node();
    return Tensor(make_node("mean", {xp}, {1}, {s / static_cast<double>(n)}, [xp, n](Node& nd) {
        if (!xp->requires_grad) return;
        auto& g = grad_of(*xp);
        double gv = nd.grad[0] / static_cast<double>(n);
        for (auto& e : g) e += gv;
    }));
}

Tensor sum(const Tensor& x) {
    double s = std::accumulate(x.data().begin(), x.data().end(), 0.0);
    auto xp = x.node();
    return Tensor(make_node("sum", {xp}, {1}, {s}, [xp](Node& nd) {
        if (!xp->requires_grad) return;
        auto& g = grad_of(*xp);
        for (auto& e : g) e += nd.grad[0];
    }));
}

Tensor clip(const Tensor& x, double lo, double hi) {
    if (lo > hi) throw TensorError("clip: lo > hi");
    std::vector<double> out(x.size());
    const auto& xv = x.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(hi, std::max(lo, xv[i]));
    auto xp = x.node();
    return Tensor(make_node("clip", {xp}, x.shape(), std::move(out), [xp, lo, hi](Node& nd) {
        if (!xp->requires_grad) return;
        auto& g = grad_of(*xp);
        for (std::size_t i = 0; i < nd.value.size(); ++i)
            if (xp->value[i] >= lo && xp->value[i] <= hi) g[i] += nd.grad[i];
    }));
}

Tensor add(const Tensor& a, const Tensor& b) {
    return binary("add", a, b, [](double x, double y) { return x + y; },
                  [](double g, double, double, double& da, double& db) {
                      da = g;
                      db = g;
                  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary("sub", a, b, [](double x, double y) { return x - y; },
                  [](double g, double, double, double& da, double& db) {
                      da = g;
                      db = -g;
                  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary("mul", a, b, [](double x, double y) { return x * y; },
                  [](double g, double av, double bv, double& da, double& db) {
                      da = g * bv;
                      db = g * av;
                  });
}

Tensor scalar_mul(const Tensor& x, double s) {
    std::vector<double> out(x.size());
    const auto& xv = x.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * xv[i];
    auto xp = x.node();
    return Tensor(make_node("smul", {xp}, x.shape(), std::move(out), [xp, s](Node& nd) {
        if (!xp->requires_grad) return;
        auto& g = grad_of(*xp);
        for (std::size_t i = 0; i < nd.value.size(); ++i) g[i] += s * nd.grad[i];
    }));
}

Tensor square(const Tensor& x) {
    return unary("square", x, [](double v) { return v * v; },
                 [](double v, double) { return 2.0 * v; });
}

Tensor exp(const Tensor& x) {
    return unary("exp", x, [](double v) { return std::exp(v); },
                 [](double, double y) { return y; });
}

Tensor min(const Tensor& a, const Tensor& b) {
    return binary("min", a, b, [](double x, double y) { return x <= y ? x : y; },
                  [](double g, double av, double bv, double& da, double& db) {
                      if (av <= bv)
                          da = g;
                      else
                          db = g;
                  });
}

Tensor gather(const Tensor& x, const std::vector<std::size_t>& idx) {
    std::size_t n = x.rows(), k = x.cols();
    if (idx.size() != n) throw TensorError("gather: index count must match row count");
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (idx[i] >= k) throw TensorError("gather: index out of range");
        out[i] = x.data()[i * k + idx[i]];
    }
    auto xp = x.node();
    auto ids = idx;
    return Tensor(make_node("gather", {xp}, {n}, std::move(out), [xp, ids, k](Node& nd) {
        if (!xp->requires_grad) return;
        auto& g = grad_of(*xp);
        for (std::size_t i = 0; i < nd.value.size(); ++i) g[i * k + ids[i]] += nd.grad[i];
    }));
}

Tensor detach(const Tensor& x) { return Tensor::constant(x.shape(), x.data()); }

}  // namespace ops

GradMap backward(const Tensor& loss, const ParamMap& params) {
    if (!loss.defined() || loss.size() != 1)
        throw TensorError("backward: loss must be a scalar node");

    // Topological order over the requires-grad subgraph (iterative DFS).
    std::vector<Node*> topo;
    std::unordered_set<Node*> seen;
    if (loss.node()->requires_grad) {
        std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
        seen.insert(loss.node().get());
        while (!stack.empty()) {
            auto& [n, i] = stack.back();
            if (i < n->parents.size()) {
                Node* p = n->parents[i++].get();
                if (p->requires_grad && !seen.count(p)) {
                    seen.insert(p);
                    stack.emplace_back(p, 0);
                }
            } else {
                topo.push_back(n);
                stack.pop_back();
            }
        }
    }

    for (Node* n : topo) n->grad.assign(n->value.size(), 0.0);
    if (!topo.empty()) {
        loss.node()->grad[0] = 1.0;
        for (auto it = topo.rbegin(); it != topo.rend(); ++it)
            if ((*it)->backprop) (*it)->backprop(**it);
    }

    GradMap grads;
    for (const auto& [name, p] : params) {
        Node* pn = p.node().get();
        if (seen.count(pn) && pn->grad.size() == pn->value.size())
            grads[name] = pn->grad;
        else
            grads[name] = std::vector<double>(p.size(), 0.0);
    }
    return grads;
}

}  // namespace wappo
