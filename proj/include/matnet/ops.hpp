#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "matnet/tensor.hpp"

namespace matnet {

enum class ActivationKind { relu, sigmoid, tanh };

ActivationKind activation_kind_from_string(std::string_view name);
std::string_view to_string(ActivationKind kind);

// Elementwise arithmetic, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

// Dense 2-D matrix product; gradients dA = dC*B^T, dB = A^T*dC.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// 1-D convolution over [C_in x T] input with [C_out x C_in x size] kernels
// and zero padding; T_out = T + 2*padding - size + 1.
Tensor conv1d(const Tensor& input, const Tensor& kernels, const Tensor& bias,
              std::size_t padding);

// Max-subtracted exponential normalization along `axis`; slices sum to 1.
Tensor softmax(const Tensor& x, std::size_t axis);

// Per-row standardization of a [T x d] tensor over the feature axis
// (population variance), followed by affine gain/offset.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& offset,
                  double eps = 1e-5);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh_act(const Tensor& x);
Tensor activation(const Tensor& x, ActivationKind kind);

// Minimum |input| seen by relu since the last reset. Finite-difference
// checks use this to reject sample points that sit on the relu kink.
void reset_relu_kink_watch();
double min_relu_input_magnitude();

// Inverted dropout: in training each element is zeroed with probability p and
// survivors are scaled by 1/(1-p); p=1 zeroes everything without scaling.
// Eval mode is the identity. `rng` must be provided when training with p>0.
Tensor dropout(const Tensor& x, double p, bool training, RngStream* rng);

Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor concat(const Tensor& a, const Tensor& b, std::size_t axis);

// y = x*W^T + b on the trailing axis; x is [d_in] or [T x d_in],
// W is [d_out x d_in], b is [d_out].
Tensor linear_affine(const Tensor& x, const Tensor& weight, const Tensor& bias);

// Mean of squared differences over all elements.
Tensor mse_loss(const Tensor& pred, const Tensor& target);

Tensor sum_all(const Tensor& x);

// Single row of a 2-D tensor as a 1-D tensor, with gradient scatter.
Tensor row(const Tensor& x, std::size_t r);

}  // namespace matnet
