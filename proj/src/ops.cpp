#include "matnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace matnet {

using detail::TensorNode;
using detail::make_op_node;

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                             " vs " + shape_to_string(b.shape()));
    }
}

void accumulate(const std::shared_ptr<TensorNode>& parent, std::size_t i, double g) {
    if (parent->requires_grad) parent->ensure_grad()[i] += g;
}

}  // namespace

ActivationKind activation_kind_from_string(std::string_view name) {
    if (name == "relu") return ActivationKind::relu;
    if (name == "sigmoid") return ActivationKind::sigmoid;
    if (name == "tanh") return ActivationKind::tanh;
    throw ConfigError("unknown activation kind '" + std::string(name) + "'");
}

std::string_view to_string(ActivationKind kind) {
    switch (kind) {
        case ActivationKind::relu: return "relu";
        case ActivationKind::sigmoid: return "sigmoid";
        case ActivationKind::tanh: return "tanh";
    }
    return "?";
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
    auto node = make_op_node(a.shape(), std::move(out), {a.node_ptr(), b.node_ptr()}, "add");
    if (node->requires_grad) {
        node->backward_fn = [](TensorNode& n) {
            for (std::size_t i = 0; i < n.numel(); ++i) {
                accumulate(n.parents[0], i, n.grad[i]);
                accumulate(n.parents[1], i, n.grad[i]);
            }
        };
    }
    return Tensor::wrap(std::move(node));
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
    auto node = make_op_node(a.shape(), std::move(out), {a.node_ptr(), b.node_ptr()}, "sub");
    if (node->requires_grad) {
        node->backward_fn = [](TensorNode& n) {
            for (std::size_t i = 0; i < n.numel(); ++i) {
                accumulate(n.parents[0], i, n.grad[i]);
                accumulate(n.parents[1], i, -n.grad[i]);
            }
        };
    }
    return Tensor::wrap(std::move(node));
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
    auto node = make_op_node(a.shape(), std::move(out), {a.node_ptr(), b.node_ptr()}, "mul");
    if (node->requires_grad) {
        node->backward_fn = [](TensorNode& n) {
            for (std::size_t i = 0; i < n.numel(); ++i) {
                accumulate(n.parents[0], i, n.grad[i] * n.parents[1]->values[i]);
                accumulate(n.parents[1], i, n.grad[i] * n.parents[0]->values[i]);
            }
        };
    }
    return Tensor::wrap(std::move(node));
}

Tensor scale(const Tensor& a, double factor) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * factor;
    auto node = make_op_node(a.shape(), std::move(out), {a.node_ptr()}, "scale");
    if (node->requires_grad) {
        node->backward_fn = [factor](TensorNode& n) {
            for (std::size_t i = 0; i < n.numel(); ++i) accumulate(n.parents[0], i, n.grad[i] * factor);
        };
    }
    return Tensor::wrap(std::move(node));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2) {
        throw DimensionError("matmul expects 2-D tensors, got " + shape_to_string(a.shape()) +
                             " and " + shape_to_string(b.shape()));
    }
    const std::size_t m = a.extent(0), k = a.extent(1), k2 = b.extent(0), n = b.extent(1);
    if (k != k2) {
        throw DimensionError("matmul: inner extents differ, " + shape_to_string(a.shape()) +
                             " vs " + shape_to_string(b.shape()));
    }
    std::vector<double> out(m * n, 0.0);
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            if (aip == 0.0) continue;
            const double* brow = bv.data() + p * n;
            double* orow = out.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
        }
    }
    auto node = make_op_node({m, n}, std::move(out), {a.node_ptr(), b.node_ptr()}, "matmul");
    if (node->requires_grad) {
        node->backward_fn = [m, k, n](TensorNode& nd) {
            const auto& pa = nd.parents[0];
            const auto& pb = nd.parents[1];
            if (pa->requires_grad) {
                auto& ga = pa->ensure_grad();
                // dA = dC * B^T
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t p = 0; p < k; ++p) {
                        double acc = 0.0;
                        const double* grow = nd.grad.data() + i * n;
                        const double* brow = pb->values.data() + p * n;
                        for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                        ga[i * k + p] += acc;
                    }
                }
            }
            if (pb->requires_grad) {
                auto& gb = pb->ensure_grad();
                // dB = A^T * dC
                for (std::size_t p = 0; p < k; ++p) {
                    for (std::size_t i = 0; i < m; ++i) {
                        const double aip = pa->values[i * k + p];
                        if (aip == 0.0) continue;
                        const double* grow = nd.grad.data() + i * n;
                        double* gbrow = gb.data() + p * n;
                        for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
                    }
                }
            }
        };
    }
    return Tensor::wrap(std::move(node));
}

Tensor transpose(const Tensor& a) {
    if (a.ndim() != 2) {
        throw DimensionError("transpose expects a 2-D tensor, got " + shape_to_string(a.shape()));
    }
    const std::size_t r = a.extent(0), c = a.extent(1);
    std::vector<double> out(r * c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a.values()[i * c + j];
    auto node = make_op_node({c, r}, std::move(out), {a.node_ptr()}, "transpose");
    if (node->requires_grad) {
        node->backward_fn = [r, c](TensorNode& n) {
            auto& g = n.parents[0]->ensure_grad();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) g[i * c + j] += n.grad[j * r + i];
        };
    }
    return Tensor::wrap(std::move(node));
}

Tensor conv1d(const Tensor& input, const Tensor& kernels, const Tensor& bias,
              std::size_t padding) {
    if (input.ndim() != 2) {
        throw DimensionError("conv1d input must be [C_in x T], got " +
                             shape_to_string(input.shape()));
    }
    if (kernels.ndim() != 3) {
        throw DimensionError("conv1d kernels must be [C_out x C_in x size], got " +
                             shape_to_string(kernels.shape()));
    }
    const std::size_t c_in = input.extent(0), t_in = input.extent(1);
    const std::size_t c_out = kernels.extent(0), k_cin = kernels.extent(1),
                      size = kernels.extent(2);
    if (k_cin != c_in) {
        throw DimensionError("conv1d: kernel channel count " + std::to_string(k_cin) +
                             " does not match input channels " + std::to_string(c_in));
    }
    if (bias.ndim() != 1 || bias.extent(0) != c_out) {
        throw DimensionError("conv1d: bias shape " + shape_to_string(bias.shape()) +
                             " does not match C_out=" + std::to_string(c_out));
    }
    const std::size_t padded = t_in + 2 * padding;
    if (size < 1 || size > padded) {
        throw DimensionError("conv1d: kernel size " + std::to_string(size) +
                             " wider than padded input length " + std::to_string(padded));
    }
    const std::size_t t_out = padded - size + 1;

    std::vector<double> out(c_out * t_out);
    const auto& in = input.values();
    const auto& w = kernels.values();
    for (std::size_t co = 0; co < c_out; ++co) {
        for (std::size_t t = 0; t < t_out; ++t) {
            double acc = bias.values()[co];
            for (std::size_t ci = 0; ci < c_in; ++ci) {
                for (std::size_t k = 0; k < size; ++k) {
                    // position in the zero-padded input
                    const std::size_t pos = t + k;
                    if (pos < padding || pos >= padding + t_in) continue;
                    acc += w[(co * c_in + ci) * size + k] * in[ci * t_in + (pos - padding)];
                }
            }
            out[co * t_out + t] = acc;
        }
    }
    auto node = make_op_node({c_out, t_out}, std::move(out),
                             {input.node_ptr(), kernels.node_ptr(), bias.node_ptr()}, "conv1d");
    if (node->requires_grad) {
        node->backward_fn = [c_in, t_in, c_out, size, padding, t_out](TensorNode& n) {
            const auto& pin = n.parents[0];
            const auto& pw = n.parents[1];
            const auto& pb = n.parents[2];
            for (std::size_t co = 0; co < c_out; ++co) {
                for (std::size_t t = 0; t < t_out; ++t) {
                    const double g = n.grad[co * t_out + t];
                    if (g == 0.0) continue;
                    if (pb->requires_grad) pb->ensure_grad()[co] += g;
                    for (std::size_t ci = 0; ci < c_in; ++ci) {
                        for (std::size_t k = 0; k < size; ++k) {
                            const std::size_t pos = t + k;
                            if (pos < padding || pos >= padding + t_in) continue;
                            const std::size_t ii = ci * t_in + (pos - padding);
                            const std::size_t wi = (co * c_in + ci) * size + k;
                            if (pw->requires_grad) pw->ensure_grad()[wi] += g * pin->values[ii];
                            if (pin->requires_grad) pin->ensure_grad()[ii] += g * pw->values[wi];
                        }
                    }
                }
            }
        };
    }
    return Tensor::wrap(std::move(node));
}

namespace {

// Iterates the slices of a 1-D or 2-D tensor along `axis` and applies fn to
// each contiguous-strided slice (offset, stride, length).
template <typename Fn>
void for_each_slice(const std::vector<std::size_t>& shape, std::size_t axis, Fn&& fn) {
    if (shape.size() == 1) {
        if (axis != 0) throw DimensionError("axis out of range for 1-D tensor");
        fn(0, 1, shape[0]);
        return;
    }
    if (shape.size() != 2) throw DimensionError("softmax supports 1-D and 2-D tensors");
    const std::size_t rows = shape[0], cols = shape[1];
    if (axis == 1) {
        for (std::size_t r = 0; r < rows; ++r) fn(r * cols, 1, cols);
    } else if (axis == 0) {
        for (std::size_t c = 0; c < cols; ++c) fn(c, cols, rows);
    } else {
        throw DimensionError("axis out of range for 2-D tensor");
    }
}

}  // namespace

Tensor softmax(const Tensor& x, std::size_t axis) {
    std::vector<double> out(x.numel());
    const auto& v = x.values();
    for_each_slice(x.shape(), axis, [&](std::size_t off, std::size_t stride, std::size_t len) {
        double mx = v[off];
        for (std::size_t i = 1; i < len; ++i) mx = std::max(mx, v[off + i * stride]);
        double sum = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
            const double e = std::exp(v[off + i * stride] - mx);
            out[off + i * stride] = e;
            sum += e;
        }
        for (std::size_t i = 0; i < len; ++i) out[off + i * stride] /= sum;
    });
    auto node = make_op_node(x.shape(), std::move(out), {x.node_ptr()}, "softmax");
    if (node->requires_grad) {
        node->backward_fn = [axis](TensorNode& n) {
            auto& g = n.parents[0]->ensure_grad();
            for_each_slice(n.shape, axis, [&](std::size_t off, std::size_t stride, std::size_t len) {
                double dot = 0.0;
                for (std::size_t i = 0; i < len; ++i) {
                    dot += n.grad[off + i * stride] * n.values[off + i * stride];
                }
                for (std::size_t i = 0; i < len; ++i) {
                    const std::size_t idx = off + i * stride;
                    g[idx] += n.values[idx] * (n.grad[idx] - dot);
                }
            });
        };
    }
    return Tensor::wrap(std::move(node));
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& offset, double eps) {
    if (x.ndim() != 2) {
        throw DimensionError("layer_norm expects [T x d], got " + shape_to_string(x.shape()));
    }
    const std::size_t t_len = x.extent(0), d = x.extent(1);
    if (gain.ndim() != 1 || gain.extent(0) != d || offset.ndim() != 1 || offset.extent(0) != d) {
        throw DimensionError("layer_norm: gain/offset must be [d]=" + std::to_string(d));
    }
    std::vector<double> out(t_len * d);
    std::vector<double> inv_std(t_len);
    std::vector<double> xhat(t_len * d);
    const auto& v = x.values();
    for (std::size_t t = 0; t < t_len; ++t) {
        double mean = 0.0;
        for (std::size_t j = 0; j < d; ++j) mean += v[t * d + j];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double c = v[t * d + j] - mean;
            var += c * c;
        }
        var /= static_cast<double>(d);
        const double inv = 1.0 / std::sqrt(var + eps);
        inv_std[t] = inv;
        for (std::size_t j = 0; j < d; ++j) {
            const double h = (v[t * d + j] - mean) * inv;
            xhat[t * d + j] = h;
            out[t * d + j] = gain.values()[j] * h + offset.values()[j];
        }
    }
    auto node = make_op_node({t_len, d}, std::move(out),
                             {x.node_ptr(), gain.node_ptr(), offset.node_ptr()}, "layer_norm");
    if (node->requires_grad) {
        node->backward_fn = [t_len, d, inv_std = std::move(inv_std),
                             xhat = std::move(xhat)](TensorNode& n) {
            const auto& px = n.parents[0];
            const auto& pg = n.parents[1];
            const auto& po = n.parents[2];
            for (std::size_t t = 0; t < t_len; ++t) {
                if (pg->requires_grad || po->requires_grad) {
                    for (std::size_t j = 0; j < d; ++j) {
                        const double gy = n.grad[t * d + j];
                        if (pg->requires_grad) pg->ensure_grad()[j] += gy * xhat[t * d + j];
                        if (po->requires_grad) po->ensure_grad()[j] += gy;
                    }
                }
                if (px->requires_grad) {
                    double mean_a = 0.0, mean_ah = 0.0;
                    for (std::size_t j = 0; j < d; ++j) {
                        const double a = n.grad[t * d + j] * pg->values[j];
                        mean_a += a;
                        mean_ah += a * xhat[t * d + j];
                    }
                    mean_a /= static_cast<double>(d);
                    mean_ah /= static_cast<double>(d);
                    auto& gx = px->ensure_grad();
                    for (std::size_t j = 0; j < d; ++j) {
                        const double a = n.grad[t * d + j] * pg->values[j];
                        gx[t * d + j] += inv_std[t] * (a - mean_a - xhat[t * d + j] * mean_ah);
                    }
                }
            }
        };
    }
    return Tensor::wrap(std::move(node));
}

namespace {

Tensor elementwise_unary(const Tensor& x, const char* op, double (*fwd)(double),
                         double (*bwd_from_out)(double out_v, double in_v)) {
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(x.values()[i]);
    auto node = make_op_node(x.shape(), std::move(out), {x.node_ptr()}, op);
    if (node->requires_grad) {
        node->backward_fn = [bwd_from_out](TensorNode& n) {
            auto& g = n.parents[0]->ensure_grad();
            for (std::size_t i = 0; i < n.numel(); ++i) {
                g[i] += n.grad[i] * bwd_from_out(n.values[i], n.parents[0]->values[i]);
            }
        };
    }
    return Tensor::wrap(std::move(node));
}

double g_min_relu_abs = std::numeric_limits<double>::infinity();

}  // namespace

void reset_relu_kink_watch() { g_min_relu_abs = std::numeric_limits<double>::infinity(); }

double min_relu_input_magnitude() { return g_min_relu_abs; }

Tensor relu(const Tensor& x) {
    for (double v : x.values()) g_min_relu_abs = std::min(g_min_relu_abs, std::abs(v));
    return elementwise_unary(
        x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
        [](double, double in_v) { return in_v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
    return elementwise_unary(
        x, "sigmoid", [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
        [](double out_v, double) { return out_v * (1.0 - out_v); });
}

Tensor tanh_act(const Tensor& x) {
    return elementwise_unary(
        x, "tanh", [](double v) { return std::tanh(v); },
        [](double out_v, double) { return 1.0 - out_v * out_v; });
}

Tensor activation(const Tensor& x, ActivationKind kind) {
    switch (kind) {
        case ActivationKind::relu: return relu(x);
        case ActivationKind::sigmoid: return sigmoid(x);
        case ActivationKind::tanh: return tanh_act(x);
    }
    throw ConfigError("unknown activation kind");
}

Tensor dropout(const Tensor& x, double p, bool training, RngStream* rng) {
    if (p < 0.0 || p > 1.0) {
        throw ConfigError("dropout probability " + std::to_string(p) + " outside [0,1]");
    }
    if (!training || p == 0.0) {
        // Eval mode (and p=0) is the identity, kept on the graph so gradients
        // pass through unchanged.
        return scale(x, 1.0);
    }
    std::vector<double> mask(x.numel());
    if (p >= 1.0) {
        std::fill(mask.begin(), mask.end(), 0.0);  // branch-zeroing case, no rescale
    } else {
        if (!rng) throw ContractError("dropout in training mode requires an rng stream");
        const double keep_scale = 1.0 / (1.0 - p);
        for (double& m : mask) m = (rng->uniform() < p) ? 0.0 : keep_scale;
    }
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.values()[i] * mask[i];
    auto node = make_op_node(x.shape(), std::move(out), {x.node_ptr()}, "dropout");
    if (node->requires_grad) {
        node->backward_fn = [mask = std::move(mask)](TensorNode& n) {
            auto& g = n.parents[0]->ensure_grad();
            for (std::size_t i = 0; i < n.numel(); ++i) g[i] += n.grad[i] * mask[i];
        };
    }
    return Tensor::wrap(std::move(node));
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
    if (parts.empty()) throw ContractError("concat of zero tensors");
    const std::size_t nd = parts[0].ndim();
    if (axis >= nd) throw DimensionError("concat axis out of range");
    for (const Tensor& p : parts) {
        if (p.ndim() != nd) throw DimensionError("concat: mixed ranks");
        for (std::size_t a = 0; a < nd; ++a) {
            if (a != axis && p.extent(a) != parts[0].extent(a)) {
                throw DimensionError("concat: non-axis extents differ, " +
                                     shape_to_string(parts[0].shape()) + " vs " +
                                     shape_to_string(p.shape()));
            }
        }
    }
    std::vector<std::size_t> out_shape = parts[0].shape();
    std::size_t axis_total = 0;
    for (const Tensor& p : parts) axis_total += p.extent(axis);
    out_shape[axis] = axis_total;

    // Treat the tensor as [outer x axis x inner] with the axis extent varying
    // per part.
    std::size_t outer = 1, inner = 1;
    for (std::size_t a = 0; a < axis; ++a) outer *= out_shape[a];
    for (std::size_t a = axis + 1; a < nd; ++a) inner *= out_shape[a];

    std::vector<double> out(outer * axis_total * inner);
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::vector<std::size_t> part_extents;
    parents.reserve(parts.size());
    for (const Tensor& p : parts) {
        parents.push_back(p.node_ptr());
        part_extents.push_back(p.extent(axis));
    }
    std::size_t axis_off = 0;
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
        const std::size_t ext = part_extents[pi];
        const auto& pv = parts[pi].values();
        for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t a = 0; a < ext; ++a) {
                const double* src = pv.data() + (o * ext + a) * inner;
                double* dst = out.data() + (o * axis_total + axis_off + a) * inner;
                std::copy(src, src + inner, dst);
            }
        }
        axis_off += ext;
    }
    auto node = make_op_node(std::move(out_shape), std::move(out), std::move(parents), "concat");
    if (node->requires_grad) {
        node->backward_fn = [outer, inner, axis_total,
                             part_extents = std::move(part_extents)](TensorNode& n) {
            std::size_t off = 0;
            for (std::size_t pi = 0; pi < n.parents.size(); ++pi) {
                const std::size_t ext = part_extents[pi];
                const auto& parent = n.parents[pi];
                if (parent->requires_grad) {
                    auto& g = parent->ensure_grad();
                    for (std::size_t o = 0; o < outer; ++o) {
                        for (std::size_t a = 0; a < ext; ++a) {
                            const double* src = n.grad.data() + (o * axis_total + off + a) * inner;
                            double* dst = g.data() + (o * ext + a) * inner;
                            for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
                        }
                    }
                }
                off += ext;
            }
        };
    }
    return Tensor::wrap(std::move(node));
}

Tensor concat(const Tensor& a, const Tensor& b, std::size_t axis) {
    const Tensor parts[] = {a, b};
    return concat(std::span<const Tensor>(parts, 2), axis);
}

Tensor linear_affine(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    if (weight.ndim() != 2) {
        throw DimensionError("linear_affine weight must be [d_out x d_in], got " +
                             shape_to_string(weight.shape()));
    }
    const std::size_t d_out = weight.extent(0), d_in = weight.extent(1);
    if (bias.ndim() != 1 || bias.extent(0) != d_out) {
        throw DimensionError("linear_affine bias shape " + shape_to_string(bias.shape()) +
                             " does not match d_out=" + std::to_string(d_out));
    }
    const bool vec = x.ndim() == 1;
    if ((vec && x.extent(0) != d_in) || (!vec && (x.ndim() != 2 || x.extent(1) != d_in))) {
        throw DimensionError("linear_affine: input " + shape_to_string(x.shape()) +
                             " incompatible with weight " + shape_to_string(weight.shape()));
    }
    const std::size_t rows = vec ? 1 : x.extent(0);
    std::vector<double> out(rows * d_out);
    const auto& xv = x.values();
    const auto& wv = weight.values();
    for (std::size_t t = 0; t < rows; ++t) {
        for (std::size_t o = 0; o < d_out; ++o) {
            double acc = bias.values()[o];
            const double* wrow = wv.data() + o * d_in;
            const double* xrow = xv.data() + t * d_in;
            for (std::size_t i = 0; i < d_in; ++i) acc += wrow[i] * xrow[i];
            out[t * d_out + o] = acc;
        }
    }
    std::vector<std::size_t> out_shape = vec ? std::vector<std::size_t>{d_out}
                                             : std::vector<std::size_t>{rows, d_out};
    auto node = make_op_node(std::move(out_shape), std::move(out),
                             {x.node_ptr(), weight.node_ptr(), bias.node_ptr()}, "linear_affine");
    if (node->requires_grad) {
        node->backward_fn = [rows, d_in, d_out](TensorNode& n) {
            const auto& px = n.parents[0];
            const auto& pw = n.parents[1];
            const auto& pb = n.parents[2];
            for (std::size_t t = 0; t < rows; ++t) {
                for (std::size_t o = 0; o < d_out; ++o) {
                    const double g = n.grad[t * d_out + o];
                    if (g == 0.0) continue;
                    if (pb->requires_grad) pb->ensure_grad()[o] += g;
                    const double* wrow = pw->values.data() + o * d_in;
                    const double* xrow = px->values.data() + t * d_in;
                    if (px->requires_grad) {
                        double* gx = px->ensure_grad().data() + t * d_in;
                        for (std::size_t i = 0; i < d_in; ++i) gx[i] += g * wrow[i];
                    }
                    if (pw->requires_grad) {
                        double* gw = pw->ensure_grad().data() + o * d_in;
                        for (std::size_t i = 0; i < d_in; ++i) gw[i] += g * xrow[i];
                    }
                }
            }
        };
    }
    return Tensor::wrap(std::move(node));
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
    require_same_shape(pred, target, "mse_loss");
    const std::size_t n = pred.numel();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = pred.values()[i] - target.values()[i];
        acc += d * d;
    }
    acc /= static_cast<double>(n);
    auto node = make_op_node({1}, {acc}, {pred.node_ptr(), target.node_ptr()}, "mse_loss");
    if (node->requires_grad) {
        node->backward_fn = [n](TensorNode& nd) {
            const double g = nd.grad[0] * 2.0 / static_cast<double>(n);
            const auto& pp = nd.parents[0];
            const auto& pt = nd.parents[1];
            for (std::size_t i = 0; i < n; ++i) {
                const double d = pp->values[i] - pt->values[i];
                accumulate(pp, i, g * d);
                accumulate(pt, i, -g * d);
            }
        };
    }
    return Tensor::wrap(std::move(node));
}

Tensor sum_all(const Tensor& x) {
    double acc = 0.0;
    for (const double v : x.values()) acc += v;
    auto node = make_op_node({1}, {acc}, {x.node_ptr()}, "sum");
    if (node->requires_grad) {
        node->backward_fn = [](TensorNode& n) {
            auto& g = n.parents[0]->ensure_grad();
            for (double& gi : g) gi += n.grad[0];
        };
    }
    return Tensor::wrap(std::move(node));
}

Tensor row(const Tensor& x, std::size_t r) {
    if (x.ndim() != 2) {
        throw DimensionError("row expects a 2-D tensor, got " + shape_to_string(x.shape()));
    }
    const std::size_t rows = x.extent(0), cols = x.extent(1);
    if (r >= rows) {
        throw DimensionError("row index " + std::to_string(r) + " out of range for " +
                             shape_to_string(x.shape()));
    }
    std::vector<double> out(x.values().begin() + r * cols, x.values().begin() + (r + 1) * cols);
    auto node = make_op_node({cols}, std::move(out), {x.node_ptr()}, "row");
    if (node->requires_grad) {
        node->backward_fn = [r, cols](TensorNode& n) {
            auto& g = n.parents[0]->ensure_grad();
            for (std::size_t j = 0; j < cols; ++j) g[r * cols + j] += n.grad[j];
        };
    }
    return Tensor::wrap(std::move(node));
}

}  // namespace matnet
