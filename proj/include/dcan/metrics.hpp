// Copyright (c) 2026 the dcan authors
// SPDX-License-Identifier: Apache-2.0
//
// Ranking metrics for leave-one-out evaluation: AUC over one positive
// against sampled negatives, single-relevant NDCG@k, and DIV@k defined as
// one minus the mean pairwise cosine similarity of the top-k items.

#pragma once

#include <cstdint>
#include <vector>

namespace dcan {

// Fraction of negatives scored strictly below the positive; ties count 0.5.
double auc(const std::vector<double>& scores, int64_t positive_pos);

// 1/log2(rank+1) when the positive's rank is <= k, else 0. Rank is 1 plus
// the number of strictly higher scores (ties resolve in the positive's
// favor, matching the rank-scan oracle).
double ndcg_at_k(const std::vector<double>& scores, int64_t positive_pos, int64_t k);

// Candidate positions ordered by descending score, ties by ascending index.
std::vector<int64_t> rank_desc(const std::vector<double>& scores);

// Mean pairwise cosine similarity over the first k embedding rows; rows
// beyond the list length are ignored with a counted warning. Zero-norm rows
// contribute zero similarity.
double ils_at_k(const std::vector<std::vector<double>>& embeddings, int64_t k,
                int64_t* warnings = nullptr);

inline double div_at_k(const std::vector<std::vector<double>>& embeddings, int64_t k,
                       int64_t* warnings = nullptr) {
    return 1.0 - ils_at_k(embeddings, k, warnings);
}

double mean(const std::vector<double>& xs);
double sample_stddev(const std::vector<double>& xs);

}  // namespace dcan
