#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace matnet {

struct GradientCase {
    std::string name;
    double max_rel_error = 0.0;
    bool pass = false;
    double seconds = 0.0;
};

// Finite-difference verification of every differentiable building block plus
// the full model at toy scale. Inputs are resampled when a relu input lands
// too close to zero for central differences to be trustworthy.
std::vector<GradientCase> run_gradient_suite(std::uint64_t seed = 7, double eps = 1e-5,
                                             double tol = 1e-4);

bool all_pass(const std::vector<GradientCase>& cases);

}  // namespace matnet
