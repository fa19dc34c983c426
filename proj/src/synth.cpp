// Copyright (c) 2026 the dcan authors
// SPDX-License-Identifier: Apache-2.0

#include "dcan/synth.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dcan/common.hpp"
#include "dcan/data.hpp"

namespace dcan {

namespace {

// The first kDistinctPrefix clicks of every user are forced distinct: the
// first three travel in the history field of the opening record and the
// fourth is that record's clicked impression, and the history-merge rule
// only round-trips exactly when none of them collide.
constexpr int64_t kDistinctPrefix = 4;

// News are assigned topics round-robin; member j of topic t is t + j*topics.
int64_t topic_size(const SynthSpec& s, int64_t t) {
    return (s.news - t + s.topics - 1) / s.topics;
}

int64_t draw_from_topic(const SynthSpec& s, int64_t t, Rng& rng) {
    return t + rng.uniform_int(topic_size(s, t)) * s.topics;
}

}  // namespace

SynthCorpus gen_synthetic_corpus(const SynthSpec& spec, uint64_t seed) {
    check_config(spec.users > 0, "synth.users must be positive");
    check_config(spec.news >= spec.topics, "synth.news must cover every topic");
    check_config(spec.topics > 0, "synth.topics must be positive");
    check_config(spec.stickiness >= 0.0 && spec.stickiness <= 1.0,
                 "synth.stickiness must be in [0, 1]");
    check_config(spec.vocab >= spec.topics, "synth.vocab must cover every topic");
    check_config(spec.title_len > 0, "synth.title_len must be positive");
    check_config(spec.min_clicks > kDistinctPrefix,
                 "synth.min_clicks must exceed " + std::to_string(kDistinctPrefix));
    check_config(spec.max_clicks >= spec.min_clicks,
                 "synth.max_clicks must be >= synth.min_clicks");
    check_config(spec.min_clicks <= spec.news,
                 "synth.min_clicks cannot exceed the catalog size");

    Rng rng(seed);
    SynthCorpus corpus;
    corpus.news_topic.resize(spec.news);

    // News file: titles drawn from per-topic word bands.
    const int64_t words_per_topic = spec.vocab / spec.topics;
    std::ostringstream news;
    for (int64_t i = 0; i < spec.news; ++i) {
        const int64_t t = i % spec.topics;
        corpus.news_topic[i] = t;
        news << "N" << i << "\ttopic" << t << "\ttopic" << t << "\t";
        for (int64_t w = 0; w < spec.title_len; ++w) {
            const int64_t word = t * words_per_topic + rng.uniform_int(words_per_topic);
            news << (w ? " " : "") << "w" << word;
        }
        news << "\t\t\t\n";
    }
    corpus.news_tsv = news.str();

    // Sticky topic-switching click streams.
    struct Row {
        int64_t timestamp;
        int64_t user;
        std::string history;
        std::string impressions;
    };
    std::vector<Row> rows;
    const int64_t base_epoch = 1573430400;  // 11/11/2019 midnight
    for (int64_t u = 0; u < spec.users; ++u) {
        const int64_t len =
            spec.min_clicks + rng.uniform_int(spec.max_clicks - spec.min_clicks + 1);
        int64_t topic = rng.uniform_int(spec.topics);
        std::vector<int64_t> clicks;
        clicks.reserve(len);
        for (int64_t j = 0; j < len; ++j) {
            if (j > 0 && !rng.bernoulli(spec.stickiness))
                topic = rng.uniform_int(spec.topics);
            int64_t item = draw_from_topic(spec, topic, rng);
            if (j < kDistinctPrefix) {
                int attempts = 0;
                while (std::find(clicks.begin(), clicks.end(), item) != clicks.end()) {
                    if (++attempts > 64) topic = rng.uniform_int(spec.topics);
                    item = draw_from_topic(spec, topic, rng);
                }
            }
            clicks.push_back(item);
        }

        // One record per click from the fourth on; the first three clicks
        // ride along as the opening record's history.
        std::ostringstream hist;
        for (int64_t j = 0; j < kDistinctPrefix - 1; ++j)
            hist << (j ? " " : "") << "N" << clicks[j];
        std::string prefix = hist.str();
        for (int64_t j = kDistinctPrefix - 1; j < len; ++j) {
            Row row;
            row.user = u;
            const int64_t step = j - (kDistinctPrefix - 1);
            row.timestamp = base_epoch + (step * spec.users + u) * 60;
            row.history = prefix;
            std::ostringstream imp;
            imp << "N" << clicks[j] << "-1";
            for (int k = 0; k < 2; ++k) {
                int64_t neg = rng.uniform_int(spec.news);
                while (neg == clicks[j]) neg = rng.uniform_int(spec.news);
                imp << " N" << neg << "-0";
            }
            row.impressions = imp.str();
            rows.push_back(std::move(row));
            prefix += (prefix.empty() ? "" : " ") + ("N" + std::to_string(clicks[j]));
        }
        corpus.user_clicks.push_back(std::move(clicks));
    }

    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        return a.timestamp < b.timestamp;
    });
    std::ostringstream beh;
    for (size_t i = 0; i < rows.size(); ++i) {
        beh << (i + 1) << "\tU" << rows[i].user << "\t"
            << format_timestamp(rows[i].timestamp) << "\t" << rows[i].history << "\t"
            << rows[i].impressions << "\n";
    }
    corpus.behaviors_tsv = beh.str();
    return corpus;
}

void write_synthetic_corpus(const SynthCorpus& corpus, const std::string& news_path,
                            const std::string& behaviors_path, bool force) {
    for (const auto& p : {news_path, behaviors_path}) {
        if (!force && std::filesystem::exists(p))
            throw DataError("refusing to overwrite " + p + " (use --force)");
    }
    std::ofstream n(news_path);
    check_data(static_cast<bool>(n), "cannot write " + news_path);
    n << corpus.news_tsv;
    std::ofstream b(behaviors_path);
    check_data(static_cast<bool>(b), "cannot write " + behaviors_path);
    b << corpus.behaviors_tsv;
}

}  // namespace dcan
