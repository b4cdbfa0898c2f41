#include "matnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace matnet {

std::string shape_to_string(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

namespace {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (const std::size_t e : shape) {
        if (e == 0) throw DimensionError("zero extent in shape " + shape_to_string(shape));
        n *= e;
    }
    return n;
}

}  // namespace

namespace detail {

void check_finite(const TensorNode& node) {
    if constexpr (kFiniteChecks) {
        for (const double v : node.values) {
            if (!std::isfinite(v)) {
                throw ContractError(std::string("non-finite value produced by op '") + node.op +
                                    "' with shape " + shape_to_string(node.shape));
            }
        }
    }
}

std::shared_ptr<TensorNode> make_op_node(std::vector<std::size_t> shape, std::vector<double> values,
                                         std::vector<std::shared_ptr<TensorNode>> parents,
                                         const char* op) {
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->values = std::move(values);
    node->op = op;
    node->requires_grad = false;
    for (const auto& p : parents) {
        if (p && p->requires_grad) node->requires_grad = true;
    }
    // Parents are only recorded when a gradient will flow; a no-grad result
    // is detached from the record entirely.
    if (node->requires_grad) node->parents = std::move(parents);
    check_finite(*node);
    return node;
}

}  // namespace detail

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
    const std::size_t n = shape_numel(shape);
    auto node = std::make_shared<detail::TensorNode>();
    node->shape = std::move(shape);
    node->values.assign(n, 0.0);
    node->requires_grad = requires_grad;
    return wrap(std::move(node));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    std::fill(t.mutable_values().begin(), t.mutable_values().end(), value);
    return t;
}

Tensor Tensor::from_values(std::vector<std::size_t> shape, std::vector<double> values,
                           bool requires_grad) {
    const std::size_t n = shape_numel(shape);
    if (values.size() != n) {
        throw DimensionError("value count " + std::to_string(values.size()) +
                             " does not match shape " + shape_to_string(shape));
    }
    auto node = std::make_shared<detail::TensorNode>();
    node->shape = std::move(shape);
    node->values = std::move(values);
    node->requires_grad = requires_grad;
    detail::check_finite(*node);
    return wrap(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from_values({1}, {value}, requires_grad);
}

Tensor Tensor::uniform_init(std::vector<std::size_t> shape, std::size_t fan_in, RngStream& rng) {
    if (fan_in == 0) throw ContractError("uniform_init requires fan_in >= 1");
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    Tensor t = zeros(std::move(shape), true);
    for (double& v : t.mutable_values()) v = rng.uniform(-bound, bound);
    return t;
}

std::size_t Tensor::extent(std::size_t axis) const {
    if (axis >= ndim()) {
        throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                             shape_to_string(shape()));
    }
    return shape()[axis];
}

double Tensor::value() const {
    if (numel() != 1) {
        throw ContractError("value() requires a scalar tensor, got shape " +
                            shape_to_string(shape()));
    }
    return values()[0];
}

double Tensor::at(std::size_t i) const {
    if (i >= numel()) throw DimensionError("flat index out of range");
    return values()[i];
}

double Tensor::at(std::size_t r, std::size_t c) const {
    if (ndim() != 2) {
        throw DimensionError("2-D indexing on tensor of shape " + shape_to_string(shape()));
    }
    if (r >= shape()[0] || c >= shape()[1]) throw DimensionError("2-D index out of range");
    return values()[r * shape()[1] + c];
}

const std::vector<double>& Tensor::grad() const {
    if (node()->grad.empty()) {
        throw ContractError("tensor has no gradient buffer (requires_grad=" +
                            std::string(requires_grad() ? "true" : "false") + ", backward not run)");
    }
    return node()->grad;
}

void Tensor::zero_grad() {
    if (!node()->grad.empty()) std::fill(node()->grad.begin(), node()->grad.end(), 0.0);
}

void Tensor::backward() const {
    if (numel() != 1) {
        throw ContractError("backward() requires a scalar loss, got shape " +
                            shape_to_string(shape()));
    }
    if (!requires_grad()) {
        throw ContractError("backward() on a tensor that does not require gradients");
    }

    // Iterative depth-first topological sort; inputs precede every op that
    // consumes them, so the reversed order is a valid backward schedule.
    std::vector<detail::TensorNode*> topo;
    std::unordered_set<detail::TensorNode*> visited;
    struct Frame {
        detail::TensorNode* node;
        std::size_t next_parent;
    };
    std::vector<Frame> stack;
    stack.push_back({node().get(), 0});
    visited.insert(node().get());
    while (!stack.empty()) {
        Frame& frame = stack.back();
        if (frame.next_parent < frame.node->parents.size()) {
            detail::TensorNode* parent = frame.node->parents[frame.next_parent++].get();
            if (parent->requires_grad && !visited.count(parent)) {
                visited.insert(parent);
                stack.push_back({parent, 0});
            }
        } else {
            topo.push_back(frame.node);
            stack.pop_back();
        }
    }

    node()->ensure_grad()[0] += 1.0;
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        detail::TensorNode* n = *it;
        if (n->backward_fn) {
            // A node sees no incoming gradient when every consumer propagated
            // exact zeros; its backward still runs, so the buffer must exist.
            n->ensure_grad();
            n->backward_fn(*n);
        }
    }
}

}  // namespace matnet
