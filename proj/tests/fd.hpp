#ifndef E2I_TESTS_FD_HPP
#define E2I_TESTS_FD_HPP

#include <algorithm>
#include <cmath>
#include <functional>

#include "core/ops.hpp"
#include "core/tensor.hpp"

// Central-difference gradient checking in double precision. Relative error
// uses a unit floor so near-zero gradients are compared absolutely.
namespace fd {

inline double rel_err(double got, double want) {
    return std::abs(got - want) / std::max({1.0, std::abs(got), std::abs(want)});
}

// Perturbs every element of x; f() re-evaluates the scalar loss.
inline double max_err_tensor(e2i::Tensor<double>& x, const e2i::Tensor<double>& grad,
                             const std::function<double()>& f, double h = 1e-5) {
    double worst = 0.0;
    for (int64_t i = 0; i < x.numel(); ++i) {
        const double saved = x.data[static_cast<size_t>(i)];
        x.data[static_cast<size_t>(i)] = saved + h;
        const double fp = f();
        x.data[static_cast<size_t>(i)] = saved - h;
        const double fm = f();
        x.data[static_cast<size_t>(i)] = saved;
        const double fdg = (fp - fm) / (2.0 * h);
        worst = std::max(worst, rel_err(fdg, grad.data[static_cast<size_t>(i)]));
    }
    return worst;
}

// Checks every parameter in the list: f() must recompute the loss AND leave
// freshly accumulated gradients in the params (caller zeroes inside f).
inline double max_err_params(const std::vector<e2i::nn::Param<double>*>& params,
                             const std::function<double()>& f, double h = 1e-5) {
    // capture analytic grads from one nominal evaluation
    f();
    std::vector<e2i::Tensor<double>> analytic;
    analytic.reserve(params.size());
    for (const auto* p : params) analytic.push_back(p->grad);
    double worst = 0.0;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        e2i::Tensor<double>& val = params[pi]->value;
        for (int64_t i = 0; i < val.numel(); ++i) {
            const double saved = val.data[static_cast<size_t>(i)];
            val.data[static_cast<size_t>(i)] = saved + h;
            const double fp = f();
            val.data[static_cast<size_t>(i)] = saved - h;
            const double fm = f();
            val.data[static_cast<size_t>(i)] = saved;
            const double fdg = (fp - fm) / (2.0 * h);
            worst = std::max(worst, rel_err(fdg, analytic[pi].data[static_cast<size_t>(i)]));
        }
    }
    return worst;
}

}  // namespace fd

#endif
