// Copyright (c) 2026 the dcan authors
// SPDX-License-Identifier: Apache-2.0
//
// MIND-format ingestion: news catalog with tokenized titles, impression
// logs, per-user chronological click sequences, padding/masking for the
// Cloze objective, and popularity-weighted negative sampling.

#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "dcan/rng.hpp"

namespace dcan {

// Sequence slot conventions. Slot 0 is [PAD], slot 1 is [mask]; catalog
// article i occupies slot i + kItemBase.
constexpr int64_t kPadItem = 0;
constexpr int64_t kMaskItem = 1;
constexpr int64_t kItemBase = 2;

// Vocabulary index conventions for title tokens.
constexpr int32_t kPadToken = 0;
constexpr int32_t kUnkToken = 1;

struct NewsArticle {
    std::string news_id;
    std::string category;
    std::vector<int32_t> title_tokens;  // vocabulary indices, truncated
    int64_t click_count = 0;            // occurrences in ingested click sequences
};

struct Vocabulary {
    std::vector<std::string> words;  // [0]="[PAD]", [1]="[UNK]", then by frequency
    std::unordered_map<std::string, int32_t> index;

    int32_t lookup(const std::string& w) const {
        auto it = index.find(w);
        return it == index.end() ? kUnkToken : it->second;
    }
    int64_t size() const { return static_cast<int64_t>(words.size()); }
};

struct Catalog {
    std::vector<NewsArticle> articles;  // position = article index
    std::unordered_map<std::string, int64_t> id_to_index;
    Vocabulary vocab;
    int64_t warnings = 0;

    int64_t size() const { return static_cast<int64_t>(articles.size()); }
};

struct ImpressionRecord {
    std::string user_id;
    int64_t timestamp = 0;              // epoch seconds
    std::vector<int64_t> history;       // article indices
    std::vector<int64_t> clicked;       // impression items with -1 suffix
    std::vector<int64_t> non_clicked;   // impression items with -0 suffix
};

struct UserSequence {
    std::string user_id;
    std::vector<int64_t> clicks;  // article indices in time order

    // Users need two held-out items (val + test) plus at least one training
    // click to enter the evaluation splits.
    bool has_eval() const { return clicks.size() >= 3; }
    int64_t test_item() const { return clicks.back(); }
    int64_t val_item() const { return clicks[clicks.size() - 2]; }
    int64_t train_len() const {
        return static_cast<int64_t>(has_eval() ? clicks.size() - 2 : clicks.size());
    }
};

struct PaddedSequence {
    std::vector<int64_t> slots;     // length N, slot conventions above
    std::vector<int64_t> ordinals;  // cumulative true-click count per slot (0 at [PAD])
    std::vector<int64_t> mask_positions;
    std::vector<int64_t> labels;    // article index per masked position
};

enum class PadMode { kTrain, kInference };

// Tokenize a title: lowercase, split on non-alphanumeric bytes.
std::vector<std::string> tokenize(const std::string& text);

// Parse "11/11/2019 9:05:58 AM" into epoch seconds. Returns false on
// malformed input.
bool parse_timestamp(const std::string& s, int64_t* out);
std::string format_timestamp(int64_t epoch);

Catalog parse_news_tsv(const std::string& path, int64_t max_title_len);

std::vector<ImpressionRecord> parse_behaviors_tsv(const std::string& path,
                                                  Catalog* catalog);

// Group records by user, sort by time, and merge history and clicked
// impressions into one chronological sequence per user. History items are
// deduplicated against everything already in the sequence; clicked
// impressions are always appended (repeat clicks are real signal) except
// when the same item arrived in the same record's history. Also fills
// catalog click counts. Output is sorted by user id.
std::vector<UserSequence> build_user_sequences(
    const std::vector<ImpressionRecord>& records, Catalog* catalog);

// Fixed-length window over the end of `clicks`. Training mode fills up to N
// slots; inference mode fills up to N-1 and appends [mask]. Shorter
// sequences are left-padded with [PAD]. `ordinal_base` positions the window
// inside a longer history: slot ordinals continue from it (0 when the
// window starts the history).
PaddedSequence truncate_pad(const std::vector<int64_t>& clicks, int64_t n,
                            PadMode mode, int64_t ordinal_base = 0);

// Independently mask each non-[PAD] slot with probability rho; if nothing
// got masked, mask one uniformly chosen non-[PAD] slot so every sequence
// trains. Labels record the replaced article indices.
PaddedSequence sample_masks(const PaddedSequence& padded, double rho, Rng& rng);

// Draw `count` negatives from the catalog excluding `user_clicks`,
// with probability proportional to click_count^alpha. Items with zero
// weight fill any shortfall uniformly; a pool smaller than `count` falls
// back to sampling with replacement (counted as a warning).
std::vector<int64_t> sample_negatives(const std::vector<int64_t>& user_clicks,
                                      const Catalog& catalog, int64_t count,
                                      double alpha, Rng& rng,
                                      int64_t* warnings = nullptr);

}  // namespace dcan
