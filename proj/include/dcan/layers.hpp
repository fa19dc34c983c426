// Copyright (c) 2026 the dcan authors
// SPDX-License-Identifier: Apache-2.0
//
// Transformer building blocks shared by the news and user encoders. The
// user encoder's attention can inject per-head coverage state into the
// Value path; with no assignments it reduces to plain multi-head attention.

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dcan/common.hpp"
#include "dcan/rng.hpp"
#include "dcan/tensor.hpp"

namespace dcan {

enum Augmentation { kAugNone = -1, kAugDecay = 0, kAugCircle = 1, kAugLog = 2, kAugGamma = 3 };
constexpr int kNumAugs = 4;

inline const char* aug_name(int a) {
    switch (a) {
        case kAugDecay: return "decay";
        case kAugCircle: return "circle";
        case kAugLog: return "log";
        case kAugGamma: return "gamma";
        default: return "none";
    }
}

inline int aug_from_name(const std::string& s) {
    for (int a = 0; a < kNumAugs; ++a)
        if (s == aug_name(a)) return a;
    check_config(s == "none", "unknown head augmentation: '" + s + "'");
    return kAugNone;
}

template <class S>
struct BlockParams {
    Tensor<S> wq, wk, wv, wo;          // d x d, per-head slices of width d/n
    Tensor<S> m1, b1, m2, b2;          // FFN d -> 4d -> d
    Tensor<S> ln1_g, ln1_b, ln2_g, ln2_b;

    void init(int64_t d, Rng& rng, S std) {
        auto mat = [&](int64_t r, int64_t c) {
            Tensor<S> t = Tensor<S>::zeros({r, c}, true);
            for (int64_t i = 0; i < t.numel(); ++i)
                t.data()[i] = static_cast<S>(rng.truncated_normal(static_cast<double>(std)));
            return t;
        };
        wq = mat(d, d);
        wk = mat(d, d);
        wv = mat(d, d);
        wo = mat(d, d);
        m1 = mat(d, 4 * d);
        b1 = Tensor<S>::zeros({4 * d}, true);
        m2 = mat(4 * d, d);
        b2 = Tensor<S>::zeros({d}, true);
        ln1_g = Tensor<S>::filled({d}, S(1), true);
        ln1_b = Tensor<S>::zeros({d}, true);
        ln2_g = Tensor<S>::filled({d}, S(1), true);
        ln2_b = Tensor<S>::zeros({d}, true);
    }

    void collect(const std::string& prefix, std::vector<std::string>* names,
                 std::vector<Tensor<S>>* params) {
        const char* leaf[] = {"wq", "wk", "wv", "wo", "m1", "b1", "m2", "b2",
                              "ln1_g", "ln1_b", "ln2_g", "ln2_b"};
        Tensor<S>* ts[] = {&wq, &wk, &wv, &wo, &m1, &b1, &m2, &b2,
                           &ln1_g, &ln1_b, &ln2_g, &ln2_b};
        for (size_t i = 0; i < 12; ++i) {
            names->push_back(prefix + "." + leaf[i]);
            params->push_back(*ts[i]);
        }
    }
};

// Multi-head self-attention over x [B,T,d] with a 0/1 key mask [B,T] (or
// undefined for no masking). head_aug[h] selects the averaged coverage view
// injected into head h's Value path; aug_views entries may be undefined for
// unused augmentations. post_injection adds the raw averaged view after the
// V projection instead of before it.
template <class S>
Tensor<S> multi_head_attention(Tensor<S> x, Tensor<S> key_mask,
                               const BlockParams<S>& p, int64_t n_heads,
                               const std::vector<int>& head_aug,
                               const std::vector<Tensor<S>>& aug_views,
                               bool post_injection) {
    const int64_t d = x.dim(-1);
    check(d % n_heads == 0, "attention: width not divisible by head count");
    const int64_t hd = d / n_heads;
    const int64_t B = x.dim(0), T = x.dim(1);

    Tensor<S> q = matmul_rows(x, p.wq);
    Tensor<S> k = matmul_rows(x, p.wk);
    Tensor<S> v = matmul_rows(x, p.wv);

    // Pre-projection injection is (x + a) @ wv, assembled per head from the
    // shared projections by linearity.
    std::vector<Tensor<S>> aug_v(kNumAugs);
    if (!post_injection) {
        for (int a = 0; a < kNumAugs; ++a) {
            bool used = false;
            for (int64_t h = 0; h < n_heads; ++h)
                if (!head_aug.empty() && head_aug[h] == a) used = true;
            if (used) {
                check(aug_views[a].defined(), "attention: missing coverage view");
                aug_v[a] = matmul_rows(aug_views[a], p.wv);
            }
        }
    }

    const S scale_f = S(1) / static_cast<S>(std::sqrt(static_cast<double>(hd)));
    std::vector<Tensor<S>> heads;
    heads.reserve(n_heads);
    for (int64_t h = 0; h < n_heads; ++h) {
        Tensor<S> qh = slice_cols(q, h * hd, hd);
        Tensor<S> kh = slice_cols(k, h * hd, hd);
        Tensor<S> vh = slice_cols(v, h * hd, hd);
        const int a = head_aug.empty() ? kAugNone : head_aug[h];
        if (a != kAugNone) {
            Tensor<S> inj = post_injection ? slice_cols(aug_views[a], h * hd, hd)
                                           : slice_cols(aug_v[a], h * hd, hd);
            vh = add(vh, inj);
        }
        Tensor<S> scores = scale(bmm(qh, kh, true), scale_f);  // [B,T,T]
        Tensor<S> att = softmax(scores, key_mask);
        heads.push_back(bmm(att, vh));  // [B,T,hd]
    }
    Tensor<S> cat = concat_cols(heads);
    (void)B;
    (void)T;
    return matmul_rows(cat, p.wo);
}

// One encoder block: y = LN(x + Drop(Attn(x))), z = LN(y + Drop(FFN(y))).
template <class S>
Tensor<S> encoder_block(Tensor<S> x, Tensor<S> key_mask, const BlockParams<S>& p,
                        int64_t n_heads, const std::vector<int>& head_aug,
                        const std::vector<Tensor<S>>& aug_views, bool post_injection,
                        double dropout_rate, bool training, Rng* rng, S ln_eps) {
    Tensor<S> att = multi_head_attention(x, key_mask, p, n_heads, head_aug, aug_views,
                                         post_injection);
    Tensor<S> y = layer_norm(add(x, dropout(att, dropout_rate, rng, training)),
                             p.ln1_g, p.ln1_b, ln_eps);
    Tensor<S> ff = badd(matmul_rows(gelu(badd(matmul_rows(y, p.m1), p.b1)), p.m2), p.b2);
    return layer_norm(add(y, dropout(ff, dropout_rate, rng, training)),
                      p.ln2_g, p.ln2_b, ln_eps);
}

// Gather rows t in [T-window, T) of x [B,T,D] into [B,window,D].
template <class S>
Tensor<S> tail_window(Tensor<S> x, int64_t window) {
    const int64_t B = x.dim(0), T = x.dim(1), D = x.dim(2);
    check(window <= T, "tail_window: window longer than sequence");
    if (window == T) return x;
    auto idx = std::make_shared<std::vector<int64_t>>();
    idx->reserve(B * window);
    for (int64_t b = 0; b < B; ++b)
        for (int64_t t = T - window; t < T; ++t) idx->push_back(b * T + t);
    return row_gather(reshape(x, {B * T, D}), idx, {B, window});
}

}  // namespace dcan
