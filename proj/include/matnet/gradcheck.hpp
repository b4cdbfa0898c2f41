#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "matnet/ops.hpp"
#include "matnet/tensor.hpp"

namespace matnet {

struct GradcheckReport {
    double max_rel_error = 0.0;
    bool pass = true;
    std::size_t checked = 0;
    std::vector<std::string> failures;  // capped; one line per failing element
};

using ScalarFn = std::function<Tensor(const Tensor&)>;

// Central finite differences (f(x+eps*e) - f(x-eps*e)) / (2*eps) against the
// reverse-mode gradient. An element passes when its absolute difference is
// below the 1e-8 floor or its relative error is within tol.
GradcheckReport gradcheck(const ScalarFn& fn, const Tensor& point, double eps = 1e-5,
                          double tol = 1e-4);

// Sweep over a set of named tensors that all feed `loss_fn`. Used for
// multi-input composites and whole-model checks; loss_fn must be
// deterministic (eval mode or fixed rng).
GradcheckReport gradcheck_params(const std::function<Tensor()>& loss_fn,
                                 const std::vector<std::pair<std::string, Tensor>>& params,
                                 double eps = 1e-5, double tol = 1e-4);

}  // namespace matnet
