#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "matnet/common.hpp"
#include "matnet/rng.hpp"

namespace matnet {

namespace detail {

// One node of the per-forward-pass computation record. Nodes form a DAG via
// `parents`; backward_fn pulls this node's gradient and accumulates into the
// parents' gradient buffers.
struct TensorNode {
    std::vector<std::size_t> shape;
    std::vector<double> values;
    bool requires_grad = false;
    std::vector<double> grad;  // allocated on first use, same extent as values
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward_fn;
    const char* op = "leaf";

    std::size_t numel() const { return values.size(); }

    std::vector<double>& ensure_grad() {
        if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
        return grad;
    }
};

}  // namespace detail

std::string shape_to_string(const std::vector<std::size_t>& shape);

// Dense 64-bit tensor participating in a recorded computation graph.
// Value-semantic handle over a shared node; values are treated as immutable
// after creation except for gradient buffers and optimizer updates on
// parameters.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
    static Tensor full(std::vector<std::size_t> shape, double value, bool requires_grad = false);
    static Tensor from_values(std::vector<std::size_t> shape, std::vector<double> values,
                              bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    // Uniform init in +-sqrt(1/fan_in); the convention used for every affine,
    // convolutional and recurrent weight in the model.
    static Tensor uniform_init(std::vector<std::size_t> shape, std::size_t fan_in, RngStream& rng);

    bool defined() const { return node_ != nullptr; }
    const std::vector<std::size_t>& shape() const { return node()->shape; }
    std::size_t ndim() const { return node()->shape.size(); }
    std::size_t numel() const { return node()->numel(); }
    std::size_t extent(std::size_t axis) const;

    const std::vector<double>& values() const { return node()->values; }
    std::vector<double>& mutable_values() { return node()->values; }

    double value() const;                       // scalar tensors only
    double at(std::size_t i) const;             // flat index
    double at(std::size_t r, std::size_t c) const;  // 2-D index

    bool requires_grad() const { return node()->requires_grad; }
    bool has_grad() const { return !node()->grad.empty(); }
    const std::vector<double>& grad() const;
    std::vector<double>& mutable_grad() { return node()->ensure_grad(); }
    void zero_grad();

    // Reverse-mode sweep from a scalar. Gradients accumulate additively into
    // every reachable requires_grad tensor; repeated calls keep accumulating
    // until the caller zeroes the buffers.
    void backward() const;

    std::shared_ptr<detail::TensorNode> node_ptr() const { return node_; }

    static Tensor wrap(std::shared_ptr<detail::TensorNode> node) {
        Tensor t;
        t.node_ = std::move(node);
        return t;
    }

private:
    const std::shared_ptr<detail::TensorNode>& node() const {
        if (!node_) throw ContractError("use of undefined tensor");
        return node_;
    }

    std::shared_ptr<detail::TensorNode> node_;
};

namespace detail {

// Finite-value guard, active in every build that does not opt out; catches
// NaN/Inf escaping an operation on finite inputs.
#ifndef MATNET_DISABLE_FINITE_CHECKS
inline constexpr bool kFiniteChecks = true;
#else
inline constexpr bool kFiniteChecks = false;
#endif

void check_finite(const TensorNode& node);

std::shared_ptr<TensorNode> make_op_node(std::vector<std::size_t> shape, std::vector<double> values,
                                         std::vector<std::shared_ptr<TensorNode>> parents,
                                         const char* op);

}  // namespace detail

}  // namespace matnet
