#ifndef E2I_CORE_ADAM_HPP
#define E2I_CORE_ADAM_HPP

#include <cmath>
#include <vector>

#include "ops.hpp"

namespace e2i::nn {

// Adam over an ordered parameter list. Moment buffers are allocated lazily on
// the first step and stay aligned with the list, so the caller must always
// pass the same parameters in the same order.
template <class S>
struct Adam {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int64_t t = 0;
    std::vector<Tensor<S>> m, v;

    void step(const std::vector<Param<S>*>& params) {
        if (m.empty()) {
            for (const Param<S>* p : params) {
                m.emplace_back(p->value.shape);
                m.back().fill(S(0));
                v.emplace_back(p->value.shape);
                v.back().fill(S(0));
            }
        }
        require(m.size() == params.size(), Status::internal, "adam: parameter list changed");
        ++t;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (size_t i = 0; i < params.size(); ++i) {
            Param<S>& p = *params[i];
            for (int64_t j = 0; j < p.value.numel(); ++j) {
                const size_t k = static_cast<size_t>(j);
                const double g = p.grad.data[k];
                const double mj = beta1 * m[i].data[k] + (1.0 - beta1) * g;
                const double vj = beta2 * v[i].data[k] + (1.0 - beta2) * g * g;
                m[i].data[k] = static_cast<S>(mj);
                v[i].data[k] = static_cast<S>(vj);
                p.value.data[k] -= static_cast<S>(lr * (mj / c1) / (std::sqrt(vj / c2) + eps));
            }
        }
    }
};

template <class S>
void zero_grads(const std::vector<Param<S>*>& params) {
    for (Param<S>* p : params) p->zero_grad();
}

// Scales gradients so the global L2 norm does not exceed max_norm.
template <class S>
double clip_grad_norm(const std::vector<Param<S>*>& params, double max_norm) {
    double sq = 0.0;
    for (const Param<S>* p : params) {
        for (const S v : p->grad.data) sq += static_cast<double>(v) * v;
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const S scale = static_cast<S>(max_norm / norm);
        for (Param<S>* p : params) {
            for (S& v : p->grad.data) v *= scale;
        }
    }
    return norm;
}

}  // namespace e2i::nn

#endif
