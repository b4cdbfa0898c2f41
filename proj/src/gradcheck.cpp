#include "matnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "matnet/common.hpp"

namespace matnet {

namespace {

constexpr double kAbsFloor = 1e-8;
constexpr std::size_t kMaxFailureLines = 10;

double eval_scalar(const Tensor& loss) {
    if (loss.numel() != 1) {
        throw ContractError("gradcheck: function must return a scalar, got shape " +
                            shape_to_string(loss.shape()));
    }
    return loss.values()[0];
}

void record(GradcheckReport& report, const std::string& label, double analytic, double numeric,
            double tol) {
    double diff = std::abs(analytic - numeric);
    double rel = 0.0;
    if (diff > kAbsFloor) {
        rel = diff / std::max(std::abs(analytic), std::abs(numeric));
    }
    report.max_rel_error = std::max(report.max_rel_error, rel);
    ++report.checked;
    if (rel > tol) {
        report.pass = false;
        if (report.failures.size() < kMaxFailureLines) {
            std::ostringstream os;
            os << label << ": analytic " << analytic << " numeric " << numeric << " rel " << rel;
            report.failures.push_back(os.str());
        }
    }
}

// Analytic gradients for every tensor in `params`, from one backward pass.
std::vector<std::vector<double>> analytic_grads(const std::function<Tensor()>& loss_fn,
                                                const std::vector<std::pair<std::string, Tensor>>& params) {
    for (const auto& [name, t] : params) {
        Tensor handle = t;
        handle.zero_grad();
    }
    Tensor loss = loss_fn();
    eval_scalar(loss);
    std::vector<std::vector<double>> grads;
    grads.reserve(params.size());
    if (loss.requires_grad()) {
        loss.backward();
        for (const auto& [name, t] : params) {
            if (t.has_grad()) {
                grads.push_back(t.grad());
            } else {
                grads.emplace_back(t.numel(), 0.0);
            }
        }
    } else {
        // The function never touched a differentiable input; gradient is zero.
        for (const auto& [name, t] : params) grads.emplace_back(t.numel(), 0.0);
    }
    return grads;
}

}  // namespace

GradcheckReport gradcheck_params(const std::function<Tensor()>& loss_fn,
                                 const std::vector<std::pair<std::string, Tensor>>& params,
                                 double eps, double tol) {
    if (eps <= 0.0 || tol <= 0.0) throw ContractError("gradcheck: eps and tol must be positive");
    GradcheckReport report;
    auto grads = analytic_grads(loss_fn, params);
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor t = params[p].second;
        for (std::size_t i = 0; i < t.numel(); ++i) {
            double saved = t.values()[i];
            t.mutable_values()[i] = saved + eps;
            double plus = eval_scalar(loss_fn());
            t.mutable_values()[i] = saved - eps;
            double minus = eval_scalar(loss_fn());
            t.mutable_values()[i] = saved;
            double numeric = (plus - minus) / (2.0 * eps);
            record(report, params[p].first + "[" + std::to_string(i) + "]", grads[p][i], numeric,
                   tol);
        }
    }
    return report;
}

GradcheckReport gradcheck(const ScalarFn& fn, const Tensor& point, double eps, double tol) {
    Tensor x = Tensor::from_values(point.shape(), point.values(), true);
    return gradcheck_params([&fn, &x]() { return fn(x); }, {{"x", x}}, eps, tol);
}

}  // namespace matnet
