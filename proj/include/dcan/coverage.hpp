// Copyright (c) 2026 the dcan authors
// SPDX-License-Identifier: Apache-2.0
//
// Coverage sequence c_1 = r_1, c_i = c_{i-1} + r_i over the clicked-news
// representations, its four augmented views, their per-position averages
// (inputs to the attention Value path), and the summed composite that the
// diversity regularizer compares outputs against.

#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "dcan/common.hpp"
#include "dcan/layers.hpp"
#include "dcan/tensor.hpp"

namespace dcan {

struct CoverageConfig {
    double eta = 0.9;    // decay factor in [0, 1]
    double freq = 1e4;   // positive scale for circle/log component ramps
    double beta = 1.0;   // gamma encoder scale, positive
    bool phi[kNumAugs] = {true, true, true, true};
    bool literal_sin = false;
    double log_eps = 1e-6;

    void validate() const {
        check_config(eta >= 0.0 && eta <= 1.0, "eta must be in [0, 1]");
        check_config(freq > 0.0, "freq must be positive");
        check_config(beta > 0.0, "beta must be positive");
    }
};

template <class S>
struct CoverageViews {
    Tensor<S> raw;                          // [B,T,D] prefix sums
    Tensor<S> aug[kNumAugs];                // enabled augmentations, pad rows zeroed
    Tensor<S> averaged[kNumAugs];           // aug rows divided by click ordinal
    Tensor<S> composite;                    // raw + sum of enabled augmentations
};

// R holds news representations with zero rows at [PAD]; ordinals[b*T+t] is
// the cumulative true-click count at each slot (0 at [PAD]; a trailing
// inference [mask] slot repeats the previous ordinal so its coverage row
// carries forward).
template <class S>
CoverageViews<S> build_coverage(Tensor<S> r, const std::vector<int64_t>& ordinals,
                                const CoverageConfig& cfg) {
    cfg.validate();
    check(r.rank() == 3, "build_coverage: expect [B,T,D]");
    const int64_t B = r.dim(0), T = r.dim(1), D = r.dim(2);
    check(static_cast<int64_t>(ordinals.size()) == B * T,
          "build_coverage: ordinal count mismatch");

    // Constant per-slot columns: validity (0 at PAD) and 1/ordinal.
    Tensor<S> valid = Tensor<S>::zeros({B, T});
    Tensor<S> inv_ord = Tensor<S>::zeros({B, T});
    for (int64_t i = 0; i < B * T; ++i) {
        if (ordinals[i] > 0) {
            valid.data()[i] = S(1);
            inv_ord.data()[i] = S(1) / static_cast<S>(ordinals[i]);
        }
    }

    CoverageViews<S> views;
    views.raw = cumsum_axis1(r);
    views.composite = views.raw;

    for (int a = 0; a < kNumAugs; ++a) {
        if (!cfg.phi[a]) continue;
        Tensor<S> enc;
        switch (a) {
            case kAugDecay:
                enc = decay_axis1(r, static_cast<S>(cfg.eta));
                break;
            case kAugCircle: {
                Tensor<S> factors = Tensor<S>::zeros({B, T, D});
                for (int64_t i = 0; i < B * T; ++i) {
                    const S ord = static_cast<S>(ordinals[i]);
                    for (int64_t d = 0; d < D; ++d)
                        factors.data()[i * D + d] = ord /
                            static_cast<S>(std::pow(cfg.freq,
                                                    static_cast<double>(d) /
                                                        static_cast<double>(D)));
                }
                enc = circle_map(views.raw, factors, cfg.literal_sin);
                break;
            }
            case kAugLog: {
                Tensor<S> scales = Tensor<S>::zeros({D});
                for (int64_t d = 0; d < D; ++d)
                    scales.data()[d] = static_cast<S>(
                        std::pow(cfg.freq, static_cast<double>(d) / static_cast<double>(D)));
                enc = log_map(views.raw, scales, static_cast<S>(cfg.log_eps));
                break;
            }
            case kAugGamma:
                enc = gamma_map(views.raw, static_cast<S>(cfg.beta));
                break;
        }
        // [PAD] rows carry zero in every view.
        views.aug[a] = colmul(enc, valid);
        views.averaged[a] = colmul(enc, inv_ord);
        views.composite = add(views.composite, views.aug[a]);
    }
    return views;
}

}  // namespace dcan
