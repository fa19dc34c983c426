// Copyright (c) 2026 the dcan authors
// SPDX-License-Identifier: Apache-2.0

#include "dcan/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include "dcan/common.hpp"

namespace dcan {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

// Days since 1970-01-01 for a civil date (proleptic Gregorian).
int64_t days_from_civil(int64_t y, int64_t m, int64_t d) {
    y -= m <= 2;
    const int64_t era = (y >= 0 ? y : y - 399) / 400;
    const int64_t yoe = y - era * 400;
    const int64_t doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const int64_t doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + doe - 719468;
}

void civil_from_days(int64_t z, int64_t* y, int64_t* m, int64_t* d) {
    z += 719468;
    const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const int64_t doe = z - era * 146097;
    const int64_t yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const int64_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const int64_t mp = (5 * doy + 2) / 153;
    *d = doy - (153 * mp + 2) / 5 + 1;
    *m = mp + (mp < 10 ? 3 : -9);
    *y = yoe + era * 400 + (*m <= 2);
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur += static_cast<char>(std::tolower(c));
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

bool parse_timestamp(const std::string& s, int64_t* out) {
    int mo = 0, d = 0, y = 0, h = 0, mi = 0, se = 0;
    char ampm[3] = {0};
    if (std::sscanf(s.c_str(), "%d/%d/%d %d:%d:%d %2s", &mo, &d, &y, &h, &mi, &se,
                    ampm) != 7)
        return false;
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || h < 1 || h > 12 || mi < 0 ||
        mi > 59 || se < 0 || se > 59)
        return false;
    if (ampm[0] == 'A' || ampm[0] == 'a') {
        if (h == 12) h = 0;
    } else if (ampm[0] == 'P' || ampm[0] == 'p') {
        if (h != 12) h += 12;
    } else {
        return false;
    }
    *out = days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + se;
    return true;
}

std::string format_timestamp(int64_t epoch) {
    int64_t days = epoch / 86400;
    int64_t rem = epoch % 86400;
    if (rem < 0) {
        rem += 86400;
        --days;
    }
    int64_t y, mo, d;
    civil_from_days(days, &y, &mo, &d);
    int64_t h24 = rem / 3600;
    int64_t mi = (rem % 3600) / 60;
    int64_t se = rem % 60;
    const char* ampm = h24 < 12 ? "AM" : "PM";
    int64_t h12 = h24 % 12;
    if (h12 == 0) h12 = 12;
    char buf[80];
    std::snprintf(buf, sizeof(buf), "%lld/%lld/%lld %lld:%02lld:%02lld %s",
                  static_cast<long long>(mo), static_cast<long long>(d),
                  static_cast<long long>(y), static_cast<long long>(h12),
                  static_cast<long long>(mi), static_cast<long long>(se), ampm);
    return buf;
}

Catalog parse_news_tsv(const std::string& path, int64_t max_title_len) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open news file: " + path);
    check_data(max_title_len > 0, "max_title_len must be positive");

    Catalog cat;
    struct RawArticle {
        std::string id, category;
        std::vector<std::string> tokens;
    };
    std::vector<RawArticle> raw;
    std::unordered_map<std::string, size_t> pos;
    std::string line;
    bool any_line = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        any_line = true;
        auto cols = split(line, '\t');
        if (cols.size() < 7) {
            ++cat.warnings;
            continue;
        }
        auto tokens = tokenize(cols[3]);
        if (tokens.empty()) {
            ++cat.warnings;
            continue;
        }
        RawArticle a{cols[0], cols[1], std::move(tokens)};
        auto it = pos.find(a.id);
        if (it != pos.end()) {
            // Duplicate id: last occurrence wins, original position kept.
            raw[it->second] = std::move(a);
            ++cat.warnings;
        } else {
            pos.emplace(a.id, raw.size());
            raw.push_back(std::move(a));
        }
    }
    if (!any_line) throw DataError("empty news file: " + path);

    // Frequency-ordered vocabulary; ties broken lexicographically.
    std::map<std::string, int64_t> freq;
    for (const auto& a : raw)
        for (const auto& t : a.tokens) ++freq[t];
    std::vector<std::pair<std::string, int64_t>> order(freq.begin(), freq.end());
    std::stable_sort(order.begin(), order.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    cat.vocab.words = {"[PAD]", "[UNK]"};
    for (const auto& [w, n] : order) {
        (void)n;
        cat.vocab.index.emplace(w, static_cast<int32_t>(cat.vocab.words.size()));
        cat.vocab.words.push_back(w);
    }

    for (auto& a : raw) {
        NewsArticle art;
        art.news_id = std::move(a.id);
        art.category = std::move(a.category);
        const size_t keep = std::min<size_t>(a.tokens.size(),
                                             static_cast<size_t>(max_title_len));
        art.title_tokens.reserve(keep);
        for (size_t i = 0; i < keep; ++i)
            art.title_tokens.push_back(cat.vocab.lookup(a.tokens[i]));
        cat.id_to_index.emplace(art.news_id, cat.size());
        cat.articles.push_back(std::move(art));
    }
    return cat;
}

std::vector<ImpressionRecord> parse_behaviors_tsv(const std::string& path,
                                                  Catalog* catalog) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open behaviors file: " + path);
    std::vector<ImpressionRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cols = split(line, '\t');
        if (cols.size() < 5) {
            ++catalog->warnings;
            continue;
        }
        ImpressionRecord rec;
        rec.user_id = cols[1];
        if (!parse_timestamp(cols[2], &rec.timestamp)) {
            ++catalog->warnings;
            continue;
        }
        for (const auto& id : split_ws(cols[3])) {
            auto it = catalog->id_to_index.find(id);
            if (it == catalog->id_to_index.end()) {
                ++catalog->warnings;
                continue;
            }
            rec.history.push_back(it->second);
        }
        for (const auto& tok : split_ws(cols[4])) {
            const size_t dash = tok.rfind('-');
            if (dash == std::string::npos || dash + 2 != tok.size() ||
                (tok[dash + 1] != '0' && tok[dash + 1] != '1')) {
                ++catalog->warnings;
                continue;
            }
            auto it = catalog->id_to_index.find(tok.substr(0, dash));
            if (it == catalog->id_to_index.end()) {
                ++catalog->warnings;
                continue;
            }
            if (tok[dash + 1] == '1')
                rec.clicked.push_back(it->second);
            else
                rec.non_clicked.push_back(it->second);
        }
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<UserSequence> build_user_sequences(
    const std::vector<ImpressionRecord>& records, Catalog* catalog) {
    // Sorted user map keeps every downstream iteration deterministic.
    std::map<std::string, std::vector<const ImpressionRecord*>> by_user;
    for (const auto& r : records) by_user[r.user_id].push_back(&r);

    std::vector<UserSequence> out;
    out.reserve(by_user.size());
    for (auto& [user, recs] : by_user) {
        std::stable_sort(recs.begin(), recs.end(),
                         [](const ImpressionRecord* a, const ImpressionRecord* b) {
                             return a->timestamp < b->timestamp;
                         });
        UserSequence seq;
        seq.user_id = user;
        std::unordered_set<int64_t> seen;
        for (const ImpressionRecord* r : recs) {
            std::unordered_set<int64_t> this_record;
            for (int64_t h : r->history) {
                if (seen.insert(h).second) {
                    seq.clicks.push_back(h);
                    this_record.insert(h);
                }
            }
            for (int64_t c : r->clicked) {
                // Repeat clicks across records are kept; only an item that
                // just arrived via this record's history field is merged.
                if (this_record.count(c)) continue;
                seq.clicks.push_back(c);
                seen.insert(c);
            }
        }
        if (seq.clicks.empty()) continue;
        out.push_back(std::move(seq));
    }

    for (auto& a : catalog->articles) a.click_count = 0;
    for (const auto& s : out)
        for (int64_t c : s.clicks) ++catalog->articles[c].click_count;
    return out;
}

PaddedSequence truncate_pad(const std::vector<int64_t>& clicks, int64_t n,
                            PadMode mode, int64_t ordinal_base) {
    check_data(n >= 2, "sequence length N must be at least 2");
    check_data(!clicks.empty(), "cannot pad an empty click sequence");
    const int64_t len = static_cast<int64_t>(clicks.size());
    const int64_t cap = mode == PadMode::kInference ? n - 1 : n;
    const int64_t w = std::min(cap, len);

    PaddedSequence p;
    p.slots.assign(n, kPadItem);
    p.ordinals.assign(n, 0);
    const int64_t start = n - w - (mode == PadMode::kInference ? 1 : 0);
    for (int64_t i = 0; i < w; ++i) {
        p.slots[start + i] = clicks[len - w + i] + kItemBase;
        p.ordinals[start + i] = ordinal_base + (len - w + i) + 1;
    }
    if (mode == PadMode::kInference) {
        p.slots[n - 1] = kMaskItem;
        p.ordinals[n - 1] = ordinal_base + len;
    }
    return p;
}

PaddedSequence sample_masks(const PaddedSequence& padded, double rho, Rng& rng) {
    check_data(rho > 0.0 && rho <= 1.0, "mask probability must be in (0, 1]");
    PaddedSequence out = padded;
    out.mask_positions.clear();
    out.labels.clear();
    std::vector<int64_t> maskable;
    for (size_t i = 0; i < padded.slots.size(); ++i)
        if (padded.slots[i] >= kItemBase) maskable.push_back(static_cast<int64_t>(i));
    check_data(!maskable.empty(), "cannot mask an all-[PAD] sequence");

    for (int64_t i : maskable) {
        if (rng.bernoulli(rho)) {
            out.mask_positions.push_back(i);
            out.labels.push_back(padded.slots[i] - kItemBase);
            out.slots[i] = kMaskItem;
        }
    }
    if (out.mask_positions.empty()) {
        const int64_t i = maskable[rng.uniform_int(static_cast<int64_t>(maskable.size()))];
        out.mask_positions.push_back(i);
        out.labels.push_back(padded.slots[i] - kItemBase);
        out.slots[i] = kMaskItem;
    }
    return out;
}

std::vector<int64_t> sample_negatives(const std::vector<int64_t>& user_clicks,
                                      const Catalog& catalog, int64_t count,
                                      double alpha, Rng& rng, int64_t* warnings) {
    check_data(count > 0, "negative count must be positive");
    std::vector<uint8_t> excluded(catalog.size(), 0);
    for (int64_t c : user_clicks) excluded[c] = 1;

    std::vector<int64_t> weighted, zero;
    std::vector<double> weights;
    for (int64_t i = 0; i < catalog.size(); ++i) {
        if (excluded[i]) continue;
        const double w = std::pow(static_cast<double>(catalog.articles[i].click_count),
                                  alpha);
        if (w > 0.0) {
            weighted.push_back(i);
            weights.push_back(w);
        } else {
            zero.push_back(i);
        }
    }
    const int64_t pool = static_cast<int64_t>(weighted.size() + zero.size());
    check_data(pool > 0, "no candidates left for negative sampling");

    std::vector<int64_t> out;
    out.reserve(count);
    if (pool >= count) {
        // Weighted sampling without replacement: order by uniform^(1/w).
        std::vector<std::pair<double, int64_t>> keys;
        keys.reserve(weighted.size());
        for (size_t j = 0; j < weighted.size(); ++j) {
            const double u = rng.uniform();
            keys.emplace_back(std::pow(u, 1.0 / weights[j]), weighted[j]);
        }
        std::sort(keys.begin(), keys.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        for (size_t j = 0; j < keys.size() && static_cast<int64_t>(out.size()) < count;
             ++j)
            out.push_back(keys[j].second);
        if (static_cast<int64_t>(out.size()) < count) {
            // Zero-weight leftovers fill the shortfall uniformly.
            rng.shuffle(zero);
            for (size_t j = 0; j < zero.size() && static_cast<int64_t>(out.size()) < count;
                 ++j)
                out.push_back(zero[j]);
        }
    } else {
        if (warnings) ++*warnings;
        // Pool too small: weighted draws with replacement (uniform when all
        // weights are zero).
        double total = 0;
        for (double w : weights) total += w;
        for (int64_t k = 0; k < count; ++k) {
            if (total > 0.0) {
                double r = rng.uniform() * total;
                size_t j = 0;
                while (j + 1 < weights.size() && r >= weights[j]) {
                    r -= weights[j];
                    ++j;
                }
                out.push_back(weighted[j]);
            } else {
                out.push_back(zero[rng.uniform_int(static_cast<int64_t>(zero.size()))]);
            }
        }
    }
    return out;
}

}  // namespace dcan
