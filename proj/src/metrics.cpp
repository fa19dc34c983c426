// Copyright (c) 2026 the dcan authors
// SPDX-License-Identifier: Apache-2.0

#include "dcan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dcan/common.hpp"

namespace dcan {

double auc(const std::vector<double>& scores, int64_t positive_pos) {
    const int64_t n = static_cast<int64_t>(scores.size());
    check(positive_pos >= 0 && positive_pos < n, "auc: positive out of range");
    check(n >= 2, "auc: need at least one negative");
    const double sp = scores[positive_pos];
    double below = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        if (i == positive_pos) continue;
        if (scores[i] < sp)
            below += 1.0;
        else if (scores[i] == sp)
            below += 0.5;
    }
    return below / static_cast<double>(n - 1);
}

double ndcg_at_k(const std::vector<double>& scores, int64_t positive_pos, int64_t k) {
    const int64_t n = static_cast<int64_t>(scores.size());
    check(positive_pos >= 0 && positive_pos < n, "ndcg: positive out of range");
    check(k >= 1, "ndcg: k must be >= 1");
    const double sp = scores[positive_pos];
    int64_t rank = 1;
    for (int64_t i = 0; i < n; ++i)
        if (scores[i] > sp) ++rank;
    if (rank > k) return 0.0;
    return 1.0 / std::log2(static_cast<double>(rank) + 1.0);
}

std::vector<int64_t> rank_desc(const std::vector<double>& scores) {
    std::vector<int64_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
        return scores[a] > scores[b];
    });
    return order;
}

double ils_at_k(const std::vector<std::vector<double>>& embeddings, int64_t k,
                int64_t* warnings) {
    check(k >= 2, "ils: k must be >= 2");
    int64_t use = static_cast<int64_t>(embeddings.size());
    if (k < use) {
        use = k;
    } else if (k > use && warnings) {
        ++*warnings;
    }
    check(use >= 2, "ils: need at least two items");

    std::vector<double> norms(use);
    for (int64_t i = 0; i < use; ++i) {
        double sq = 0;
        for (double v : embeddings[i]) sq += v * v;
        norms[i] = std::sqrt(sq);
    }
    double total = 0.0;
    for (int64_t i = 0; i < use; ++i) {
        for (int64_t j = i + 1; j < use; ++j) {
            if (norms[i] == 0.0 || norms[j] == 0.0) continue;
            double dot = 0;
            for (size_t a = 0; a < embeddings[i].size(); ++a)
                dot += embeddings[i][a] * embeddings[j][a];
            total += dot / (norms[i] * norms[j]);
        }
    }
    return total * 2.0 / (static_cast<double>(use) * static_cast<double>(use - 1));
}

double mean(const std::vector<double>& xs) {
    check(!xs.empty(), "mean: empty input");
    double s = 0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double sample_stddev(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean(xs);
    double s = 0;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

}  // namespace dcan
