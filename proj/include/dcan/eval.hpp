// Copyright (c) 2026 the dcan authors
// SPDX-License-Identifier: Apache-2.0
//
// Leave-one-out evaluation: per-user candidate sets (held-out click plus
// sampled negatives), AUC / NDCG@k / DIV@k, aggregated per seed over users
// and then across seeds.

#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "dcan/config.hpp"
#include "dcan/data.hpp"
#include "dcan/metrics.hpp"
#include "dcan/model.hpp"
#include "dcan/training.hpp"

#include "json.hpp"

namespace dcan {

struct EvalConfig {
    int64_t negatives = 100;
    double alpha = 1.0;
    std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
    std::string div_source = "model";  // "model" | "category"
    bool full_catalog = false;
    std::vector<int64_t> ndcg_ks = {5, 10};
    std::vector<int64_t> div_ks = {10, 20, 50};
    int64_t eval_batch = 256;

    static EvalConfig from_config(const Config& c) {
        EvalConfig e;
        e.negatives = c.get_int("eval.negatives");
        e.alpha = c.get_double("eval.alpha");
        e.seeds.clear();
        for (const auto& s : Config::split_list(c.get_str("eval.seeds"))) {
            char* end = nullptr;
            const long long v = std::strtoll(s.c_str(), &end, 10);
            check_config(end && *end == '\0' && v >= 0,
                         "eval.seeds must be a comma-separated list of integers");
            e.seeds.push_back(static_cast<uint64_t>(v));
        }
        e.div_source = c.get_str("eval.div_source");
        check_config(e.div_source == "model" || e.div_source == "category",
                     "eval.div_source must be 'model' or 'category'");
        e.full_catalog = c.get_bool("eval.full_catalog");
        check_config(e.negatives >= 1, "eval.negatives must be at least 1");
        check_config(!e.seeds.empty(), "eval.seeds must not be empty");
        return e;
    }
};

struct MetricSummary {
    std::string name;
    double mean = 0;
    double stddev = 0;
    std::vector<double> per_seed;
};

struct EvalReport {
    int64_t users = 0;
    int64_t warnings = 0;
    std::vector<uint64_t> seeds;
    std::vector<MetricSummary> metrics;

    const MetricSummary& metric(const std::string& name) const {
        for (const auto& m : metrics)
            if (m.name == name) return m;
        throw std::runtime_error("unknown metric: " + name);
    }
};

// Per-article rows used by the diversity metric.
inline std::vector<std::vector<double>> diversity_rows(
    const Catalog& catalog, const std::string& div_source,
    const std::vector<std::vector<double>>& model_rows) {
    if (div_source == "model") return model_rows;
    std::vector<std::string> cats;
    std::unordered_map<std::string, size_t> cat_index;
    for (const auto& a : catalog.articles)
        if (cat_index.emplace(a.category, cats.size()).second)
            cats.push_back(a.category);
    std::vector<std::vector<double>> rows(catalog.articles.size());
    for (size_t i = 0; i < catalog.articles.size(); ++i) {
        rows[i].assign(cats.size(), 0.0);
        rows[i][cat_index[catalog.articles[i].category]] = 1.0;
    }
    return rows;
}

template <class S>
EvalReport evaluate(Model<S>& model, const std::vector<UserSequence>& seqs,
                    const Catalog& catalog, const EvalConfig& ec) {
    std::vector<const UserSequence*> users;
    for (const auto& s : seqs)
        if (s.has_eval()) users.push_back(&s);
    check_data(!users.empty(), "no users with enough clicks to evaluate");

    const ModelConfig& mc = model.config();

    // The model forward does not depend on the evaluation seed; compute the
    // user states and catalog table once.
    std::vector<std::vector<double>> states;
    states.reserve(users.size());
    for (size_t at = 0; at < users.size(); at += static_cast<size_t>(ec.eval_batch)) {
        const size_t hi =
            std::min(users.size(), at + static_cast<size_t>(ec.eval_batch));
        std::vector<const UserSequence*> chunk(users.begin() + at, users.begin() + hi);
        Batch batch = assemble_eval_batch(chunk, mc.history, 1);
        for (auto& row : model.user_states(batch)) states.push_back(std::move(row));
    }
    const std::vector<std::vector<double>> table = model.catalog_embeddings();
    const std::vector<double> bias = model.output_bias();
    const std::vector<std::vector<double>> div_rows =
        diversity_rows(catalog, ec.div_source, table);
    const int64_t d = mc.dim;

    std::vector<std::string> names = {"auc"};
    for (int64_t k : ec.ndcg_ks) names.push_back("ndcg@" + std::to_string(k));
    for (int64_t k : ec.div_ks) names.push_back("div@" + std::to_string(k));

    EvalReport report;
    report.users = static_cast<int64_t>(users.size());
    report.seeds = ec.seeds;
    std::vector<std::vector<double>> per_seed(names.size());

    int64_t warnings = 0;
    for (uint64_t seed : ec.seeds) {
        Rng seed_rng(seed);
        std::vector<double> sums(names.size(), 0.0);
        for (size_t u = 0; u < users.size(); ++u) {
            const UserSequence& seq = *users[u];
            const int64_t test = seq.test_item();

            std::vector<int64_t> candidates = {test};
            if (ec.full_catalog) {
                std::unordered_set<int64_t> clicked(seq.clicks.begin(),
                                                    seq.clicks.end());
                for (int64_t c = 0; c < catalog.size(); ++c)
                    if (!clicked.count(c)) candidates.push_back(c);
            } else {
                Rng neg_rng = seed_rng.child(Rng::hash_str(seq.user_id));
                for (int64_t c : sample_negatives(seq.clicks, catalog, ec.negatives,
                                                  ec.alpha, neg_rng, &warnings))
                    candidates.push_back(c);
            }
            check(candidates.size() >= 2, "candidate set needs at least one negative");

            std::vector<double> scores(candidates.size());
            const std::vector<double>& h = states[u];
            for (size_t j = 0; j < candidates.size(); ++j) {
                const int64_t c = candidates[j];
                double dot = 0;
                for (int64_t i = 0; i < d; ++i) dot += h[i] * table[c][i];
                scores[j] = dot + bias[c];
            }

            size_t mi = 0;
            sums[mi++] += auc(scores, 0);
            for (int64_t k : ec.ndcg_ks) sums[mi++] += ndcg_at_k(scores, 0, k);

            const std::vector<int64_t> order = rank_desc(scores);
            const int64_t top = std::min<int64_t>(
                static_cast<int64_t>(order.size()),
                *std::max_element(ec.div_ks.begin(), ec.div_ks.end()));
            std::vector<std::vector<double>> ranked;
            ranked.reserve(static_cast<size_t>(top));
            for (int64_t j = 0; j < top; ++j)
                ranked.push_back(div_rows[candidates[order[j]]]);
            for (int64_t k : ec.div_ks) sums[mi++] += div_at_k(ranked, k, &warnings);
        }
        for (size_t m = 0; m < names.size(); ++m)
            per_seed[m].push_back(sums[m] / static_cast<double>(users.size()));
    }
    report.warnings = warnings;

    for (size_t m = 0; m < names.size(); ++m) {
        MetricSummary ms;
        ms.name = names[m];
        ms.per_seed = per_seed[m];
        ms.mean = mean(per_seed[m]);
        ms.stddev = sample_stddev(per_seed[m]);
        report.metrics.push_back(std::move(ms));
    }
    return report;
}

inline void write_eval_report(const EvalReport& report, const std::string& dir) {
    {
        std::ofstream tsv(dir + "/metrics.tsv");
        check_data(static_cast<bool>(tsv), "cannot write " + dir + "/metrics.tsv");
        tsv << "metric\tmean\tstddev";
        for (uint64_t s : report.seeds) tsv << "\tseed_" << s;
        tsv << "\n";
        tsv.precision(10);
        for (const auto& m : report.metrics) {
            tsv << m.name << '\t' << m.mean << '\t' << m.stddev;
            for (double v : m.per_seed) tsv << '\t' << v;
            tsv << "\n";
        }
    }
    nlohmann::json j;
    j["users"] = report.users;
    j["warnings"] = report.warnings;
    j["seeds"] = report.seeds;
    std::vector<std::string> order;
    for (const auto& m : report.metrics) {
        order.push_back(m.name);
        j["metrics"][m.name] = {
            {"mean", m.mean}, {"stddev", m.stddev}, {"per_seed", m.per_seed}};
    }
    j["metric_order"] = order;
    std::ofstream js(dir + "/metrics.json");
    check_data(static_cast<bool>(js), "cannot write " + dir + "/metrics.json");
    js << j.dump(2) << "\n";
}

inline EvalReport read_eval_report(const std::string& path) {
    std::ifstream in(path);
    check_data(static_cast<bool>(in), "cannot read " + path);
    nlohmann::json j;
    in >> j;
    EvalReport report;
    report.users = j.at("users").get<int64_t>();
    report.warnings = j.at("warnings").get<int64_t>();
    report.seeds = j.at("seeds").get<std::vector<uint64_t>>();
    for (const auto& name : j.at("metric_order").get<std::vector<std::string>>()) {
        const auto& body = j.at("metrics").at(name);
        MetricSummary ms;
        ms.name = name;
        ms.mean = body.at("mean").get<double>();
        ms.stddev = body.at("stddev").get<double>();
        ms.per_seed = body.at("per_seed").get<std::vector<double>>();
        report.metrics.push_back(std::move(ms));
    }
    return report;
}

}  // namespace dcan
