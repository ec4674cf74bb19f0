#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace wappo {

struct TensorError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Node;

// Dense float64 tensor participating in a reverse-mode computation graph.
// A Tensor is a handle to a graph node; constants are leaf nodes that do
// not require gradients, parameters are named leaves that do.
class Tensor {
public:
    Tensor() = default;

    static Tensor constant(std::vector<std::size_t> shape, std::vector<double> data);
    static Tensor scalar(double v);
    static Tensor zeros(std::vector<std::size_t> shape);
    static Tensor parameter(const std::string& name, std::vector<std::size_t> shape,
                            std::vector<double> data);

    const std::vector<std::size_t>& shape() const;
    const std::vector<double>& data() const;
    std::vector<double>& mutable_data();  // parameters only: optimizer step / clamp
    std::size_t size() const;
    double item() const;  // scalar tensors
    bool defined() const { return node_ != nullptr; }
    std::size_t rows() const;
    std::size_t cols() const;

    std::shared_ptr<Node> node() const { return node_; }
    explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

private:
    std::shared_ptr<Node> node_;
};

struct Node {
    std::string op;
    std::string name;  // parameters only
    bool is_param = false;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::vector<std::size_t> shape;
    std::vector<double> value;
    std::vector<double> grad;  // sized lazily during backward
    std::function<void(Node&)> backprop;  // reads this->grad, accumulates into parents

    std::size_t size() const { return value.size(); }
};

// Scoped switch that disables graph recording; forward passes inside the
// scope produce constant results.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

bool grad_enabled();

using ParamMap = std::map<std::string, Tensor>;
using GradMap = std::map<std::string, std::vector<double>>;

namespace ops {

// y = x W + b, with x [n,d] (rank-1 x treated as one row), W [d,k], b [k].
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor leaky_relu(const Tensor& x, double slope);
Tensor tanh(const Tensor& x);
// Row-wise log-softmax over the last dimension.
Tensor log_softmax(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor sum(const Tensor& x);
Tensor clip(const Tensor& x, double lo, double hi);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scalar_mul(const Tensor& x, double s);
Tensor square(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor min(const Tensor& a, const Tensor& b);
// Picks x[i, idx[i]] per row; idx values must lie in [0, cols).
Tensor gather(const Tensor& x, const std::vector<std::size_t>& idx);
// Stops gradient flow; value is shared, graph is cut.
Tensor detach(const Tensor& x);

}  // namespace ops

// Reverse-mode sweep from a scalar loss node. Returns a gradient for every
// parameter in `params`; parameters not on any path to the loss get zeros.
GradMap backward(const Tensor& loss, const ParamMap& params);

}  // namespace wappo
