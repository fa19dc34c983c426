// Copyright (c) 2026 the dcan authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line entry point: synthetic corpus generation, training,
// evaluation, and the ablation study.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dcan/ablate.hpp"
#include "dcan/checkpoint.hpp"
#include "dcan/common.hpp"
#include "dcan/config.hpp"
#include "dcan/data.hpp"
#include "dcan/eval.hpp"
#include "dcan/model.hpp"
#include "dcan/synth.hpp"
#include "dcan/training.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir = "out";
    int64_t seed = -1;
    int64_t threads = 1;
    bool force = false;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs* args, bool with_force,
                bool with_threads) {
    cmd->add_option("--config", args->config_path, "configuration file");
    cmd->add_option("--out", args->out_dir, "output directory");
    cmd->add_option("--seed", args->seed, "override the base seed");
    if (with_threads)
        cmd->add_option("--threads", args->threads,
                        "variant parallelism (results are thread-count invariant)");
    if (with_force) cmd->add_flag("--force", args->force, "overwrite existing outputs");
    cmd->add_option("overrides", args->overrides,
                    "section.key=value configuration overrides");
}

dcan::Config build_config(const CommonArgs& args) {
    dcan::Config cfg;
    if (!args.config_path.empty()) cfg.load_file(args.config_path);
    for (const auto& o : args.overrides) cfg.apply_override(o);
    if (args.seed >= 0) cfg.set("seed", std::to_string(args.seed));
    return cfg;
}

void echo_config(const dcan::Config& cfg, const std::string& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream echo(dir + "/config.resolved");
    dcan::check_data(static_cast<bool>(echo), "cannot write " + dir + "/config.resolved");
    echo << cfg.resolved();
}

struct LoadedData {
    dcan::Catalog catalog;
    std::vector<dcan::UserSequence> sequences;
};

LoadedData load_data(const dcan::Config& cfg) {
    const std::string news = cfg.get_str("data.news");
    const std::string behaviors = cfg.get_str("data.behaviors");
    dcan::check_config(!news.empty(), "data.news is required");
    dcan::check_config(!behaviors.empty(), "data.behaviors is required");
    LoadedData d;
    d.catalog = dcan::parse_news_tsv(news, cfg.get_int("model.title_len"));
    auto records = dcan::parse_behaviors_tsv(behaviors, &d.catalog);
    d.sequences = dcan::build_user_sequences(records, &d.catalog);
    if (d.catalog.warnings > 0)
        std::cerr << "warning: " << d.catalog.warnings
                  << " malformed input rows were skipped\n";
    return d;
}

int cmd_synth(const CommonArgs& args) {
    dcan::Config cfg = build_config(args);
    dcan::SynthSpec spec;
    spec.users = cfg.get_int("synth.users");
    spec.news = cfg.get_int("synth.news");
    spec.topics = cfg.get_int("synth.topics");
    spec.stickiness = cfg.get_double("synth.stickiness");
    spec.vocab = cfg.get_int("synth.vocab");
    spec.title_len = cfg.get_int("synth.title_len");
    spec.min_clicks = cfg.get_int("synth.min_clicks");
    spec.max_clicks = cfg.get_int("synth.max_clicks");
    const uint64_t seed = static_cast<uint64_t>(cfg.get_int("seed"));
    dcan::SynthCorpus corpus = dcan::gen_synthetic_corpus(spec, seed);
    std::filesystem::create_directories(args.out_dir);
    dcan::write_synthetic_corpus(corpus, args.out_dir + "/news.tsv",
                                 args.out_dir + "/behaviors.tsv", args.force);
    echo_config(cfg, args.out_dir);
    std::cout << "wrote " << args.out_dir << "/news.tsv and " << args.out_dir
              << "/behaviors.tsv (" << spec.users << " users, " << spec.news
              << " articles)\n";
    return 0;
}

int cmd_train(const CommonArgs& args) {
    dcan::Config cfg = build_config(args);
    LoadedData data = load_data(cfg);
    dcan::EvalReport report =
        dcan::run_pipeline(cfg, data.catalog, data.sequences, args.out_dir, &std::cout);
    std::cout << "checkpoint: " << args.out_dir << "/model.ckpt\n";
    for (const auto& m : report.metrics)
        std::cout << m.name << " = " << m.mean << " +- " << m.stddev << "\n";
    return 0;
}

int cmd_eval(const CommonArgs& args) {
    dcan::Config cfg = build_config(args);
    LoadedData data = load_data(cfg);
    std::string ckpt = cfg.get_str("eval.checkpoint");
    if (ckpt.empty()) ckpt = args.out_dir + "/model.ckpt";
    dcan::check_data(std::filesystem::exists(ckpt),
                     "checkpoint not found: " + ckpt);

    dcan::ModelConfig mc = dcan::ModelConfig::from_config(cfg);
    const uint64_t seed = static_cast<uint64_t>(cfg.get_int("seed"));
    dcan::Model<float> model(mc, data.catalog, dcan::Rng::mix(seed, dcan::kInitSeedTag));
    model.load_named(dcan::load_checkpoint(ckpt));

    dcan::EvalConfig ec = dcan::EvalConfig::from_config(cfg);
    dcan::EvalReport report = dcan::evaluate(model, data.sequences, data.catalog, ec);
    std::filesystem::create_directories(args.out_dir);
    echo_config(cfg, args.out_dir);
    dcan::write_eval_report(report, args.out_dir);
    std::cout << "evaluated " << report.users << " users over " << report.seeds.size()
              << " seeds\n";
    for (const auto& m : report.metrics)
        std::cout << m.name << " = " << m.mean << " +- " << m.stddev << "\n";
    return 0;
}

int cmd_ablate(const CommonArgs& args) {
    dcan::Config cfg = build_config(args);
    LoadedData data = load_data(cfg);
    echo_config(cfg, args.out_dir);
    dcan::AblationResult result = dcan::run_ablation(
        cfg, data.catalog, data.sequences, args.out_dir, args.threads, &std::cout);
    dcan::write_ablation_table(result, args.out_dir);
    std::cout << "wrote " << args.out_dir << "/ablation.tsv ("
              << result.variants.size() << " variants)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"coverage-aware diversified news recommender"};
    app.require_subcommand(1);

    CommonArgs synth_args, train_args, eval_args, ablate_args;
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic corpus");
    add_common(synth, &synth_args, true, false);
    CLI::App* train = app.add_subcommand("train", "train and evaluate a model");
    add_common(train, &train_args, false, false);
    CLI::App* eval = app.add_subcommand("eval", "evaluate a saved checkpoint");
    add_common(eval, &eval_args, false, false);
    CLI::App* ablate = app.add_subcommand("ablate", "run the ablation study");
    add_common(ablate, &ablate_args, false, true);

    try {
        app.parse(argc, argv);
        if (synth->parsed()) return cmd_synth(synth_args);
        if (train->parsed()) return cmd_train(train_args);
        if (eval->parsed()) return cmd_eval(eval_args);
        if (ablate->parsed()) return cmd_ablate(ablate_args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    } catch (const dcan::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const dcan::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const dcan::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
