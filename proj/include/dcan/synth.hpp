// Copyright (c) 2026 the dcan authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic MIND-format corpus: per-topic word distributions for titles and
// a sticky topic-switching click process, so diversity metrics have real
// headroom while everything stays reproducible from one seed.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dcan/rng.hpp"

namespace dcan {

struct SynthSpec {
    int64_t users = 500;
    int64_t news = 200;
    int64_t topics = 8;
    double stickiness = 0.8;
    int64_t vocab = 240;
    int64_t title_len = 8;
    int64_t min_clicks = 12;
    int64_t max_clicks = 30;
};

struct SynthCorpus {
    std::string news_tsv;
    std::string behaviors_tsv;
    // Ground truth for round-trip checks: per-user click streams as article
    // indices (position in the news file).
    std::vector<std::vector<int64_t>> user_clicks;
    std::vector<int64_t> news_topic;
};

// Deterministic given (spec, seed): two calls produce byte-identical text.
SynthCorpus gen_synthetic_corpus(const SynthSpec& spec, uint64_t seed);

// Write corpus files; refuses to overwrite unless force is set.
void write_synthetic_corpus(const SynthCorpus& corpus, const std::string& news_path,
                            const std::string& behaviors_path, bool force);

}  // namespace dcan
