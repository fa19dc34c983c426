// Copyright (c) 2026 the dcan authors
// SPDX-License-Identifier: Apache-2.0
//
// Ablation study: the full model, single-augmentation removals, the plain
// sequence model, and a head-count sweep. Variants run the same
// train-then-evaluate pipeline under the same seed; finished variants are
// reused from their report files.

#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "dcan/checkpoint.hpp"
#include "dcan/eval.hpp"
#include "dcan/model.hpp"
#include "dcan/training.hpp"

namespace dcan {

// Seed stream tags so the parameter init and the training schedule draw
// from decoupled generators.
constexpr uint64_t kInitSeedTag = 1;
constexpr uint64_t kTrainSeedTag = 2;

struct AblationVariant {
    std::string key;    // directory name
    std::string label;  // report row name
    Config config;
};

inline int64_t nearest_multiple(int64_t value, int64_t n) {
    const int64_t lo = value / n * n;
    const int64_t hi = lo + n;
    int64_t best = (value - lo <= hi - value) ? lo : hi;
    if (best <= 0) best = n;
    return best;
}

inline std::vector<AblationVariant> enumerate_variants(const Config& base) {
    std::vector<AblationVariant> out;
    out.push_back({"full", "full", base});

    const char* augs[] = {"decay", "circle", "log", "gamma"};
    for (const char* aug : augs) {
        Config c = base;
        c.set("model.phi_" + std::string(aug), "false");
        std::vector<std::string> heads = Config::split_list(c.get_str("model.heads"));
        for (auto& h : heads)
            if (h == aug) h = "none";
        std::string joined;
        for (size_t i = 0; i < heads.size(); ++i) {
            if (i) joined += ",";
            joined += heads[i];
        }
        c.set("model.heads", joined);
        out.push_back({"no-" + std::string(aug),
                       "-C^" + std::string(aug) + "-DOR^" + aug, c});
    }

    {
        Config c = base;
        std::vector<std::string> heads = Config::split_list(c.get_str("model.heads"));
        std::string joined;
        for (size_t i = 0; i < heads.size(); ++i) {
            if (i) joined += ",";
            joined += "none";
        }
        c.set("model.heads", joined);
        for (const char* aug : augs) c.set("model.phi_" + std::string(aug), "false");
        c.set("train.gamma", "0");
        out.push_back({"plain", "plain", c});
    }

    std::vector<std::string> designated;
    for (const auto& h : Config::split_list(base.get_str("model.heads")))
        if (h != "none") designated.push_back(h);
    const int64_t dim = base.get_int("model.dim");
    for (const auto& ns : Config::split_list(base.get_str("ablate.head_sweep"))) {
        char* end = nullptr;
        const long long n = std::strtoll(ns.c_str(), &end, 10);
        check_config(end && *end == '\0' && n >= 1,
                     "ablate.head_sweep must list positive integers");
        check_config(static_cast<size_t>(n) >= designated.size(),
                     "head sweep count below the designated head count");
        Config c = base;
        c.set("model.dim", std::to_string(nearest_multiple(dim, n)));
        std::string joined;
        for (long long i = 0; i < n; ++i) {
            if (i) joined += ",";
            joined += static_cast<size_t>(i) < designated.size()
                          ? designated[static_cast<size_t>(i)]
                          : std::string("none");
        }
        c.set("model.heads", joined);
        out.push_back({"heads-" + std::to_string(n), "n=" + std::to_string(n), c});
    }
    return out;
}

// Train a model under `cfg` and evaluate it. Writes the epoch log, the
// checkpoint, the resolved config, and the metric reports into `out_dir`.
inline EvalReport run_pipeline(const Config& cfg, const Catalog& catalog,
                               const std::vector<UserSequence>& seqs,
                               const std::string& out_dir, std::ostream* live_log) {
    std::filesystem::create_directories(out_dir);
    {
        std::ofstream echo(out_dir + "/config.resolved");
        check_data(static_cast<bool>(echo),
                   "cannot write " + out_dir + "/config.resolved");
        echo << cfg.resolved();
    }
    const uint64_t seed = static_cast<uint64_t>(cfg.get_int("seed"));
    ModelConfig mc = ModelConfig::from_config(cfg);
    TrainConfig tc = TrainConfig::from_config(cfg);
    EvalConfig ec = EvalConfig::from_config(cfg);

    Model<float> model(mc, catalog, Rng::mix(seed, kInitSeedTag));
    {
        std::ofstream tlog(out_dir + "/train_log.tsv");
        check_data(static_cast<bool>(tlog),
                   "cannot write " + out_dir + "/train_log.tsv");
        std::vector<EpochStats> hist =
            train(model, seqs, tc, Rng::mix(seed, kTrainSeedTag), &tlog);
        if (live_log)
            for (size_t e = 0; e < hist.size(); ++e)
                *live_log << "epoch " << (e + 1) << "/" << hist.size()
                          << " L_total=" << hist[e].total << "\n";
    }
    save_checkpoint(out_dir + "/model.ckpt", model.to_named(), model.manifest());
    EvalReport report = evaluate(model, seqs, catalog, ec);
    write_eval_report(report, out_dir);
    return report;
}

struct AblationResult {
    std::vector<AblationVariant> variants;
    std::vector<EvalReport> reports;
    std::vector<bool> reused;
};

inline AblationResult run_ablation(const Config& base, const Catalog& catalog,
                                   const std::vector<UserSequence>& seqs,
                                   const std::string& out_dir, int64_t threads,
                                   std::ostream* log) {
    AblationResult result;
    result.variants = enumerate_variants(base);
    // Validate every variant configuration up front.
    for (const auto& v : result.variants) ModelConfig::from_config(v.config);
    result.reports.resize(result.variants.size());
    result.reused.assign(result.variants.size(), false);
    std::filesystem::create_directories(out_dir);

    std::mutex log_mutex;
    std::atomic<size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&]() {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= result.variants.size()) return;
            const AblationVariant& v = result.variants[i];
            const std::string vdir = out_dir + "/" + v.key;
            try {
                if (std::filesystem::exists(vdir + "/metrics.json")) {
                    result.reports[i] = read_eval_report(vdir + "/metrics.json");
                    result.reused[i] = true;
                    if (log) {
                        std::lock_guard<std::mutex> g(log_mutex);
                        *log << "variant " << v.label << ": reusing " << vdir
                             << "/metrics.json\n";
                    }
                    continue;
                }
                if (log) {
                    std::lock_guard<std::mutex> g(log_mutex);
                    *log << "variant " << v.label << ": training\n";
                }
                result.reports[i] = run_pipeline(v.config, catalog, seqs, vdir, nullptr);
                if (log) {
                    std::lock_guard<std::mutex> g(log_mutex);
                    *log << "variant " << v.label << ": done\n";
                }
            } catch (...) {
                std::lock_guard<std::mutex> g(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    const size_t pool = static_cast<size_t>(std::max<int64_t>(1, threads));
    if (pool == 1) {
        worker();
    } else {
        std::vector<std::thread> ts;
        for (size_t t = 0; t < pool; ++t) ts.emplace_back(worker);
        for (auto& t : ts) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);
    return result;
}

inline void write_ablation_table(const AblationResult& result,
                                 const std::string& out_dir) {
    std::ofstream tsv(out_dir + "/ablation.tsv");
    check_data(static_cast<bool>(tsv), "cannot write " + out_dir + "/ablation.tsv");
    tsv.precision(10);
    const auto& names = result.reports.at(0).metrics;
    tsv << "variant";
    for (const auto& m : names) tsv << '\t' << m.name << "_mean\t" << m.name << "_stddev";
    tsv << "\n";
    for (size_t i = 0; i < result.variants.size(); ++i) {
        tsv << result.variants[i].label;
        for (const auto& m : names) {
            const MetricSummary& ms = result.reports[i].metric(m.name);
            tsv << '\t' << ms.mean << '\t' << ms.stddev;
        }
        tsv << "\n";
    }
}

}  // namespace dcan
