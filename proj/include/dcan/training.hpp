// Copyright (c) 2026 the dcan authors
// SPDX-License-Identifier: Apache-2.0
//
// Cloze training loop: window sampling over user histories, batch assembly
// with the full-prefix coverage grid, per-batch loss invariants, and the
// epoch log.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "dcan/adam.hpp"
#include "dcan/config.hpp"
#include "dcan/data.hpp"
#include "dcan/model.hpp"

namespace dcan {

struct TrainConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int64_t batch = 64;
    int64_t epochs = 5;
    double mask_prob = 0.2;
    double gamma = 0.3;
    bool window_sampling = true;

    static TrainConfig from_config(const Config& c) {
        TrainConfig t;
        t.lr = c.get_double("train.lr");
        t.beta1 = c.get_double("train.beta1");
        t.beta2 = c.get_double("train.beta2");
        t.adam_eps = c.get_double("train.adam_eps");
        t.batch = c.get_int("train.batch");
        t.epochs = c.get_int("train.epochs");
        t.mask_prob = c.get_double("train.mask_prob");
        t.gamma = c.get_double("train.gamma");
        t.window_sampling = c.get_bool("train.window_sampling");
        check_config(t.batch >= 1, "train.batch must be at least 1");
        check_config(t.epochs >= 0, "train.epochs must be non-negative");
        check_config(t.gamma >= 0.0, "train.gamma must be non-negative");
        return t;
    }
};

// Assemble one training batch. Each user contributes a window ending at a
// sampled prefix length (or the full training prefix when window sampling
// is off). The coverage grid always sees true article slots; with
// `mask_zero_coverage` the masked positions are zeroed out instead.
inline Batch assemble_train_batch(const std::vector<const UserSequence*>& users,
                                  int64_t n, double rho, bool window_sampling,
                                  bool mask_zero_coverage, Rng& rng) {
    const int64_t b_count = static_cast<int64_t>(users.size());
    check(b_count > 0, "empty training batch");

    std::vector<int64_t> ends(users.size());
    int64_t prefix = n;
    for (size_t b = 0; b < users.size(); ++b) {
        const int64_t len = users[b]->train_len();
        check_data(len >= 1, "user without training clicks");
        const int64_t e =
            window_sampling ? 1 + static_cast<int64_t>(rng.uniform_int(
                                      static_cast<uint64_t>(len)))
                            : len;
        ends[b] = e;
        prefix = std::max(prefix, e);
    }

    Batch out;
    out.batch = b_count;
    out.prefix = prefix;
    out.cov_slots.assign(static_cast<size_t>(b_count * prefix), kPadItem);
    out.ordinals.assign(static_cast<size_t>(b_count * prefix), 0);
    out.att_slots.assign(static_cast<size_t>(b_count * n), kPadItem);

    for (int64_t b = 0; b < b_count; ++b) {
        const int64_t e = ends[static_cast<size_t>(b)];
        const auto& clicks = users[static_cast<size_t>(b)]->clicks;
        std::vector<int64_t> window(clicks.begin(), clicks.begin() + e);
        PaddedSequence padded = truncate_pad(window, n, PadMode::kTrain, 0);
        PaddedSequence masked = sample_masks(padded, rho, rng);

        for (int64_t i = 0; i < e; ++i) {
            out.cov_slots[static_cast<size_t>(b * prefix + prefix - e + i)] =
                window[static_cast<size_t>(i)] + kItemBase;
            out.ordinals[static_cast<size_t>(b * prefix + prefix - e + i)] = i + 1;
        }
        for (int64_t i = 0; i < n; ++i)
            out.att_slots[static_cast<size_t>(b * n + i)] =
                masked.slots[static_cast<size_t>(i)];
        for (size_t m = 0; m < masked.mask_positions.size(); ++m) {
            const int64_t pos = masked.mask_positions[m];
            out.mask_rows.push_back(b * n + pos);
            out.labels.push_back(masked.labels[m]);
            if (mask_zero_coverage)
                out.cov_slots[static_cast<size_t>(b * prefix + prefix - n + pos)] =
                    kPadItem;
        }
    }
    return out;
}

// Inference batch: the full click sequence minus `holdout` trailing items,
// with a trailing [mask] slot that carries the previous coverage forward.
inline Batch assemble_eval_batch(const std::vector<const UserSequence*>& users,
                                 int64_t n, int64_t holdout) {
    const int64_t b_count = static_cast<int64_t>(users.size());
    check(b_count > 0, "empty inference batch");

    std::vector<int64_t> lens(users.size());
    int64_t prefix = n;
    for (size_t b = 0; b < users.size(); ++b) {
        const int64_t e =
            static_cast<int64_t>(users[b]->clicks.size()) - holdout;
        check_data(e >= 1, "user with no clicks before the held-out item");
        lens[b] = e;
        prefix = std::max(prefix, e + 1);
    }

    Batch out;
    out.batch = b_count;
    out.prefix = prefix;
    out.cov_slots.assign(static_cast<size_t>(b_count * prefix), kPadItem);
    out.ordinals.assign(static_cast<size_t>(b_count * prefix), 0);
    out.att_slots.assign(static_cast<size_t>(b_count * n), kPadItem);

    for (int64_t b = 0; b < b_count; ++b) {
        const int64_t e = lens[static_cast<size_t>(b)];
        const auto& clicks = users[static_cast<size_t>(b)]->clicks;
        std::vector<int64_t> window(clicks.begin(), clicks.begin() + e);
        PaddedSequence padded = truncate_pad(window, n, PadMode::kInference, 0);
        for (int64_t i = 0; i < e; ++i) {
            out.cov_slots[static_cast<size_t>(b * prefix + prefix - 1 - e + i)] =
                window[static_cast<size_t>(i)] + kItemBase;
            out.ordinals[static_cast<size_t>(b * prefix + prefix - 1 - e + i)] = i + 1;
        }
        out.ordinals[static_cast<size_t>(b * prefix + prefix - 1)] = e;
        for (int64_t i = 0; i < n; ++i)
            out.att_slots[static_cast<size_t>(b * n + i)] =
                padded.slots[static_cast<size_t>(i)];
    }
    return out;
}

struct EpochStats {
    double main = 0;
    double diverse = 0;
    double total = 0;
    int64_t batches = 0;
    double seconds = 0;
};

// One pass over all users in shuffled order. Verifies per-batch loss
// invariants and aborts on non-finite losses.
template <class S>
EpochStats train_epoch(Model<S>& model, Adam<S>& opt,
                       const std::vector<UserSequence>& seqs,
                       const TrainConfig& tc, Rng& rng) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<const UserSequence*> order;
    order.reserve(seqs.size());
    for (const auto& s : seqs) order.push_back(&s);
    rng.shuffle(order);

    const ModelConfig& mc = model.config();
    EpochStats st;
    for (size_t at = 0; at < order.size(); at += static_cast<size_t>(tc.batch)) {
        const size_t hi = std::min(order.size(), at + static_cast<size_t>(tc.batch));
        std::vector<const UserSequence*> chunk(order.begin() + at, order.begin() + hi);
        Batch batch = assemble_train_batch(chunk, mc.history, tc.mask_prob,
                                           tc.window_sampling,
                                           mc.mask_zero_coverage, rng);
        model.zero_grads();
        auto out = model.forward_batch(batch, tc.gamma, true, &rng);
        const double lm = static_cast<double>(out.main.item());
        const double ld = static_cast<double>(out.diverse.item());
        const double lt = static_cast<double>(out.total.item());
        if (!std::isfinite(lm) || !std::isfinite(ld) || !std::isfinite(lt))
            throw NumericError("non-finite loss at batch " +
                               std::to_string(st.batches) + ": main=" +
                               std::to_string(lm) + " diverse=" + std::to_string(ld));
        check(ld >= -4.0 - 1e-5 && ld <= 1e-5,
              "diversity loss outside [-4, 0] at batch " + std::to_string(st.batches));
        check(std::fabs(lt - (lm + tc.gamma * ld)) <= 1e-5,
              "total loss is not main + gamma * diverse at batch " +
                  std::to_string(st.batches));
        backward(out.total);
        opt.step(model.params());
        st.main += lm;
        st.diverse += ld;
        st.total += lt;
        st.batches += 1;
    }
    if (st.batches > 0) {
        st.main /= static_cast<double>(st.batches);
        st.diverse /= static_cast<double>(st.batches);
        st.total /= static_cast<double>(st.batches);
    }
    if (!model.values_finite())
        throw NumericError("non-finite model parameters after epoch");
    st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                     .count();
    return st;
}

// Full training run. Writes one tab-separated line per epoch:
// epoch, L_main, L_diverse, L_total, wallclock seconds.
template <class S>
std::vector<EpochStats> train(Model<S>& model, const std::vector<UserSequence>& seqs,
                              const TrainConfig& tc, uint64_t seed,
                              std::ostream* log) {
    check_data(!seqs.empty(), "no user sequences to train on");
    Adam<S> opt(static_cast<S>(tc.lr), static_cast<S>(tc.beta1),
                static_cast<S>(tc.beta2), static_cast<S>(tc.adam_eps));
    Rng rng(seed);
    if (log) *log << "epoch\tL_main\tL_diverse\tL_total\twallclock_s\n";
    std::vector<EpochStats> history;
    for (int64_t e = 0; e < tc.epochs; ++e) {
        EpochStats st = train_epoch(model, opt, seqs, tc, rng);
        if (log)
            *log << (e + 1) << '\t' << st.main << '\t' << st.diverse << '\t'
                 << st.total << '\t' << st.seconds << '\n';
        history.push_back(st);
    }
    return history;
}

}  // namespace dcan
