// Copyright (c) 2026 the dcan authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "dcan/tensor.hpp"

namespace dcan {

// Adam with bias correction. Moment buffers are keyed by position in the
// parameter list, so the list must be stable across steps.
template <class S>
class Adam {
public:
    Adam(S lr, S beta1 = S(0.9), S beta2 = S(0.999), S eps = S(1e-8))
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(std::vector<Tensor<S>>& params) {
        if (m_.empty()) {
            m_.resize(params.size());
            v_.resize(params.size());
            for (size_t i = 0; i < params.size(); ++i) {
                m_[i].assign(static_cast<size_t>(params[i].numel()), S(0));
                v_[i].assign(static_cast<size_t>(params[i].numel()), S(0));
            }
        }
        ++t_;
        const S bc1 = S(1) - static_cast<S>(std::pow(static_cast<double>(beta1_), t_));
        const S bc2 = S(1) - static_cast<S>(std::pow(static_cast<double>(beta2_), t_));
        for (size_t i = 0; i < params.size(); ++i) {
            auto& p = params[i];
            if (!p.has_grad()) continue;
            S* w = p.data();
            const S* g = p.grad_data();
            S* m = m_[i].data();
            S* v = v_[i].data();
            const int64_t n = p.numel();
            for (int64_t j = 0; j < n; ++j) {
                m[j] = beta1_ * m[j] + (S(1) - beta1_) * g[j];
                v[j] = beta2_ * v[j] + (S(1) - beta2_) * g[j] * g[j];
                const S mh = m[j] / bc1;
                const S vh = v[j] / bc2;
                w[j] -= lr_ * mh / (std::sqrt(vh) + eps_);
            }
        }
    }

    int64_t steps() const { return t_; }

private:
    S lr_, beta1_, beta2_, eps_;
    int64_t t_ = 0;
    std::vector<std::vector<S>> m_;
    std::vector<std::vector<S>> v_;
};

}  // namespace dcan
