// Copyright (c) 2026 the dcan authors
// SPDX-License-Identifier: Apache-2.0
//
// The full recommender: news encoder (word embeddings -> transformer ->
// attention pooling), coverage-embedded user encoder, and the prediction
// head over the news catalog. Templated on the scalar type: f32 for
// training, f64 for finite-difference gradient verification.

#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "dcan/checkpoint.hpp"
#include "dcan/config.hpp"
#include "dcan/coverage.hpp"
#include "dcan/data.hpp"
#include "dcan/layers.hpp"
#include "dcan/tensor.hpp"

namespace dcan {

struct ModelConfig {
    int64_t dim = 128;
    int64_t word_dim = 200;
    int64_t blocks = 2;
    int64_t news_blocks = 1;
    int64_t title_len = 30;
    int64_t history = 50;
    std::vector<int> head_aug = {kAugDecay, kAugCircle, kAugLog, kAugGamma,
                                 kAugNone,  kAugNone,   kAugNone, kAugNone};
    double dropout = 0.2;
    CoverageConfig coverage;
    bool post_injection = false;
    bool mask_zero_coverage = false;
    std::string embedding_file;

    int64_t heads() const { return static_cast<int64_t>(head_aug.size()); }

    std::string heads_string() const {
        std::string s;
        for (size_t i = 0; i < head_aug.size(); ++i) {
            if (i) s += ",";
            s += aug_name(head_aug[i]);
        }
        return s;
    }

    void validate() const {
        check_config(dim > 0, "model.dim must be positive");
        check_config(word_dim > 0, "model.word_dim must be positive");
        check_config(blocks >= 1, "model.blocks must be at least 1");
        check_config(news_blocks >= 1, "model.news_blocks must be at least 1");
        check_config(title_len >= 1, "model.title_len must be at least 1");
        check_config(history >= 2, "model.history must be at least 2");
        check_config(!head_aug.empty(), "model.heads must name at least one head");
        check_config(dim % heads() == 0,
                     "model.dim must be divisible by the head count");
        check_config(dropout >= 0.0 && dropout < 1.0, "model.dropout must be in [0, 1)");
        coverage.validate();
        for (int a : head_aug) {
            if (a == kAugNone) continue;
            check_config(coverage.phi[a],
                         std::string("head assignment references disabled augmentation '") +
                             aug_name(a) + "'");
        }
    }

    static ModelConfig from_config(const Config& c) {
        ModelConfig m;
        m.dim = c.get_int("model.dim");
        m.word_dim = c.get_int("model.word_dim");
        m.blocks = c.get_int("model.blocks");
        m.news_blocks = c.get_int("model.news_blocks");
        m.title_len = c.get_int("model.title_len");
        m.history = c.get_int("model.history");
        m.head_aug.clear();
        for (const auto& name : Config::split_list(c.get_str("model.heads")))
            m.head_aug.push_back(aug_from_name(name));
        m.dropout = c.get_double("model.dropout");
        m.coverage.eta = c.get_double("model.eta");
        m.coverage.freq = c.get_double("model.freq");
        m.coverage.beta = c.get_double("model.beta");
        m.coverage.phi[kAugDecay] = c.get_bool("model.phi_decay");
        m.coverage.phi[kAugCircle] = c.get_bool("model.phi_circle");
        m.coverage.phi[kAugLog] = c.get_bool("model.phi_log");
        m.coverage.phi[kAugGamma] = c.get_bool("model.phi_gamma");
        m.coverage.literal_sin = c.get_bool("model.circle_literal_sin");
        const std::string& inj = c.get_str("model.value_injection");
        check_config(inj == "pre" || inj == "post",
                     "model.value_injection must be 'pre' or 'post'");
        m.post_injection = inj == "post";
        m.mask_zero_coverage = c.get_bool("model.mask_zero_coverage");
        m.embedding_file = c.get_str("model.embedding_file");
        m.validate();
        return m;
    }
};

// One assembled training or inference batch. The coverage grid spans the
// full click prefix (P columns, right-aligned); the attention window is its
// trailing `history` columns.
struct Batch {
    int64_t batch = 0;
    int64_t prefix = 0;                // P >= history
    std::vector<int64_t> cov_slots;    // B*P, true items; [mask]/zeroed -> [PAD]
    std::vector<int64_t> att_slots;    // B*history, window with [mask] applied
    std::vector<int64_t> ordinals;     // B*P cumulative click counts
    std::vector<int64_t> mask_rows;    // flat b*history + position
    std::vector<int64_t> labels;       // article index per mask row
};

template <class S>
class Model {
public:
    Model(ModelConfig cfg, const Catalog& catalog, uint64_t seed)
        : cfg_(std::move(cfg)),
          vocab_size_(catalog.vocab.size()),
          catalog_size_(catalog.size()) {
        cfg_.validate();
        check_config(catalog_size_ > 0, "catalog is empty");
        build_title_grid(catalog);
        init_params(seed);
        if (!cfg_.embedding_file.empty()) load_word_embeddings(catalog);
        collect_params();
    }

    const ModelConfig& config() const { return cfg_; }
    int64_t catalog_size() const { return catalog_size_; }
    int64_t vocab_size() const { return vocab_size_; }

    std::vector<Tensor<S>>& params() { return params_; }
    const std::vector<std::string>& param_names() const { return names_; }

    void zero_grads() {
        for (auto& p : params_) p.zero_grad();
    }

    bool values_finite() const {
        for (const auto& p : params_)
            if (!p.all_finite()) return false;
        return true;
    }

    // News catalog representations, graph-connected so training gradients
    // reach the news encoder through sequence lookups and the output layer.
    Tensor<S> encode_catalog(bool training, Rng* rng) {
        const int64_t C = catalog_size_, L = cfg_.title_len;
        Tensor<S> we = row_gather(word_emb_, title_idx_, {C, L});
        we = colmul(we, token_valid_);
        we = badd(we, word_pos_);
        Tensor<S> h = matmul_rows(we, word_proj_);
        static const std::vector<int> no_aug;
        static const std::vector<Tensor<S>> no_views;
        for (auto& block : news_blocks_)
            h = encoder_block(h, token_valid_, block, cfg_.heads(), no_aug, no_views,
                              false, cfg_.dropout, training, rng, ln_eps());
        Tensor<S> scores = reshape(matmul_rows(h, news_query_), {C, L});
        Tensor<S> w = softmax(scores, token_valid_);
        Tensor<S> r = bmm(reshape(w, {C, 1, L}), h);
        return reshape(r, {C, cfg_.dim});
    }

    struct BatchOutput {
        Tensor<S> main, diverse, total;
        int64_t masked = 0;
    };

    BatchOutput forward_batch(const Batch& in, double gamma, bool training,
                              Rng* rng) {
        check(!in.mask_rows.empty(), "forward_batch: no masked positions");
        check(in.mask_rows.size() == in.labels.size(),
              "forward_batch: label count mismatch");
        Core core = forward_core(in, training, rng);
        const int64_t B = in.batch, N = cfg_.history, d = cfg_.dim;
        const int64_t M = static_cast<int64_t>(in.mask_rows.size());

        auto mask_idx = std::make_shared<std::vector<int64_t>>(in.mask_rows);
        Tensor<S> om = row_gather(reshape(core.output, {B * N, d}), mask_idx, {M});
        Tensor<S> h1 = gelu(badd(matmul(om, mp_), bp_));
        Tensor<S> logits = badd(matmul(h1, core.r_cat, false, true), bo_);
        auto labels = std::make_shared<std::vector<int64_t>>(in.labels);
        Tensor<S> main = softmax_xent(logits, labels);

        Tensor<S> cm =
            row_gather(reshape(core.composite_window, {B * N, d}), mask_idx, {M});
        Tensor<S> on = l2_normalize_rows(om, static_cast<S>(1e-8));
        Tensor<S> cn = l2_normalize_rows(cm, static_cast<S>(1e-8));
        // Positions where either vector has zero norm contribute nothing.
        Tensor<S> valid = Tensor<S>::zeros({M});
        for (int64_t r = 0; r < M; ++r) {
            S so = 0, sc = 0;
            for (int64_t i = 0; i < d; ++i) {
                so += om.data()[r * d + i] * om.data()[r * d + i];
                sc += cm.data()[r * d + i] * cm.data()[r * d + i];
            }
            valid.data()[r] = (so > S(0) && sc > S(0)) ? S(1) : S(0);
        }
        Tensor<S> diff = sub(on, cn);
        Tensor<S> sq = colmul(mul(diff, diff), valid);
        Tensor<S> diverse = scale(sum_all(sq), S(-1) / static_cast<S>(M));
        Tensor<S> total = add(main, scale(diverse, static_cast<S>(gamma)));
        return {main, diverse, total, M};
    }

    // Score candidate articles at the trailing [mask] slot of each row.
    // Returns softmax probabilities over each candidate list.
    std::vector<std::vector<double>> score_candidates(
        const Batch& in, const std::vector<std::vector<int64_t>>& candidates) {
        check(static_cast<int64_t>(candidates.size()) == in.batch,
              "score_candidates: one candidate list per row required");
        Core core = forward_core(in, false, nullptr);
        const int64_t B = in.batch, N = cfg_.history, d = cfg_.dim;
        auto last = std::make_shared<std::vector<int64_t>>();
        for (int64_t b = 0; b < B; ++b) last->push_back(b * N + N - 1);
        Tensor<S> ob = row_gather(reshape(core.output, {B * N, d}), last, {B});
        Tensor<S> h1 = gelu(badd(matmul(ob, mp_), bp_));

        const S* h = h1.data();
        const S* rc = core.r_cat.data();
        const S* bo = bo_.data();
        std::vector<std::vector<double>> out(candidates.size());
        for (int64_t b = 0; b < B; ++b) {
            const auto& cand = candidates[b];
            check(!cand.empty(), "score_candidates: empty candidate set");
            std::vector<double>& scores = out[b];
            scores.resize(cand.size());
            double mx = -std::numeric_limits<double>::infinity();
            for (size_t j = 0; j < cand.size(); ++j) {
                const int64_t c = cand[j];
                check(c >= 0 && c < catalog_size_, "score_candidates: bad candidate id");
                double dot = 0;
                for (int64_t i = 0; i < d; ++i)
                    dot += static_cast<double>(h[b * d + i]) *
                           static_cast<double>(rc[c * d + i]);
                scores[j] = dot + static_cast<double>(bo[c]);
                mx = std::max(mx, scores[j]);
            }
            double sum = 0;
            for (double& s : scores) {
                s = std::exp(s - mx);
                sum += s;
            }
            for (double& s : scores) s /= sum;
        }
        return out;
    }

    // Prediction-head states at the trailing [mask] slot of each row, as
    // plain doubles. Candidate scores are dot(state, article) + bias.
    std::vector<std::vector<double>> user_states(const Batch& in) {
        Core core = forward_core(in, false, nullptr);
        const int64_t B = in.batch, N = cfg_.history, d = cfg_.dim;
        auto last = std::make_shared<std::vector<int64_t>>();
        for (int64_t b = 0; b < B; ++b) last->push_back(b * N + N - 1);
        Tensor<S> ob = row_gather(reshape(core.output, {B * N, d}), last, {B});
        Tensor<S> h1 = gelu(badd(matmul(ob, mp_), bp_));
        std::vector<std::vector<double>> out(static_cast<size_t>(B));
        for (int64_t b = 0; b < B; ++b) {
            out[static_cast<size_t>(b)].resize(static_cast<size_t>(d));
            for (int64_t i = 0; i < d; ++i)
                out[static_cast<size_t>(b)][static_cast<size_t>(i)] =
                    static_cast<double>(h1.data()[b * d + i]);
        }
        return out;
    }

    std::vector<double> output_bias() const {
        std::vector<double> out(static_cast<size_t>(catalog_size_));
        for (int64_t c = 0; c < catalog_size_; ++c)
            out[static_cast<size_t>(c)] = static_cast<double>(bo_.data()[c]);
        return out;
    }

    // Catalog embeddings as plain doubles (inference) for diversity metrics.
    std::vector<std::vector<double>> catalog_embeddings() {
        Tensor<S> r = encode_catalog(false, nullptr);
        std::vector<std::vector<double>> out(catalog_size_);
        for (int64_t c = 0; c < catalog_size_; ++c) {
            out[c].resize(cfg_.dim);
            for (int64_t i = 0; i < cfg_.dim; ++i)
                out[c][i] = static_cast<double>(r.data()[c * cfg_.dim + i]);
        }
        return out;
    }

    std::vector<NamedTensor> to_named() const {
        std::vector<NamedTensor> out;
        for (size_t i = 0; i < params_.size(); ++i) {
            NamedTensor t;
            t.name = names_[i];
            t.shape = params_[i].shape();
            t.data.resize(static_cast<size_t>(params_[i].numel()));
            for (int64_t j = 0; j < params_[i].numel(); ++j)
                t.data[static_cast<size_t>(j)] = static_cast<float>(params_[i].data()[j]);
            out.push_back(std::move(t));
        }
        return out;
    }

    void load_named(const std::vector<NamedTensor>& tensors) {
        check_data(tensors.size() == params_.size(),
                   "checkpoint parameter count mismatch");
        for (size_t i = 0; i < tensors.size(); ++i) {
            check_data(tensors[i].name == names_[i],
                       "checkpoint tensor order mismatch at " + tensors[i].name);
            check_data(tensors[i].shape == params_[i].shape(),
                       "checkpoint shape mismatch for " + tensors[i].name);
            for (int64_t j = 0; j < params_[i].numel(); ++j)
                params_[i].data()[j] = static_cast<S>(tensors[i].data[static_cast<size_t>(j)]);
        }
    }

    std::string manifest() const {
        std::ostringstream os;
        os << "dim = " << cfg_.dim << "\n"
           << "word_dim = " << cfg_.word_dim << "\n"
           << "heads = " << cfg_.heads_string() << "\n"
           << "blocks = " << cfg_.blocks << "\n"
           << "news_blocks = " << cfg_.news_blocks << "\n"
           << "title_len = " << cfg_.title_len << "\n"
           << "history = " << cfg_.history << "\n"
           << "dropout = " << cfg_.dropout << "\n"
           << "eta = " << cfg_.coverage.eta << "\n"
           << "freq = " << cfg_.coverage.freq << "\n"
           << "beta = " << cfg_.coverage.beta << "\n"
           << "phi_decay = " << cfg_.coverage.phi[kAugDecay] << "\n"
           << "phi_circle = " << cfg_.coverage.phi[kAugCircle] << "\n"
           << "phi_log = " << cfg_.coverage.phi[kAugLog] << "\n"
           << "phi_gamma = " << cfg_.coverage.phi[kAugGamma] << "\n"
           << "circle_literal_sin = " << cfg_.coverage.literal_sin << "\n"
           << "value_injection = " << (cfg_.post_injection ? "post" : "pre") << "\n"
           << "mask_zero_coverage = " << cfg_.mask_zero_coverage << "\n"
           << "vocab = " << vocab_size_ << "\n"
           << "catalog = " << catalog_size_ << "\n";
        return os.str();
    }

private:
    struct Core {
        Tensor<S> output;            // [B,N,d]
        Tensor<S> composite_window;  // [B,N,d]
        Tensor<S> r_cat;             // [C,d]
    };

    S ln_eps() const { return static_cast<S>(1e-5); }

    Core forward_core(const Batch& in, bool training, Rng* rng) {
        const int64_t B = in.batch, P = in.prefix, N = cfg_.history;
        check(B > 0, "forward: empty batch");
        check(P >= N, "forward: prefix grid shorter than the history window");
        check(static_cast<int64_t>(in.cov_slots.size()) == B * P,
              "forward: coverage grid size mismatch");
        check(static_cast<int64_t>(in.att_slots.size()) == B * N,
              "forward: window grid size mismatch");
        check(static_cast<int64_t>(in.ordinals.size()) == B * P,
              "forward: ordinal grid size mismatch");

        Tensor<S> r_cat = encode_catalog(training, rng);
        Tensor<S> r_ext = concat_rows<S>({zero_row_, mask_emb_, r_cat});

        auto cov_idx = std::make_shared<std::vector<int64_t>>(in.cov_slots);
        Tensor<S> r_cov = row_gather(r_ext, cov_idx, {B, P});
        CoverageViews<S> views = build_coverage(r_cov, in.ordinals, cfg_.coverage);

        auto att_idx = std::make_shared<std::vector<int64_t>>(in.att_slots);
        Tensor<S> h = row_gather(r_ext, att_idx, {B, N});
        h = badd(h, pos_emb_);

        Tensor<S> key_mask = Tensor<S>::zeros({B, N});
        for (int64_t i = 0; i < B * N; ++i)
            key_mask.data()[i] = in.att_slots[static_cast<size_t>(i)] != kPadItem
                                     ? S(1)
                                     : S(0);

        std::vector<Tensor<S>> aug_views(kNumAugs);
        for (int a = 0; a < kNumAugs; ++a)
            if (views.averaged[a].defined())
                aug_views[a] = tail_window(views.averaged[a], N);

        for (auto& block : user_blocks_)
            h = encoder_block(h, key_mask, block, cfg_.heads(), cfg_.head_aug,
                              aug_views, cfg_.post_injection, cfg_.dropout, training,
                              rng, ln_eps());

        return {h, tail_window(views.composite, N), r_cat};
    }

    void build_title_grid(const Catalog& catalog) {
        const int64_t C = catalog_size_, L = cfg_.title_len;
        title_idx_ = std::make_shared<std::vector<int64_t>>();
        title_idx_->reserve(C * L);
        token_valid_ = Tensor<S>::zeros({C, L});
        for (int64_t c = 0; c < C; ++c) {
            const auto& toks = catalog.articles[c].title_tokens;
            check_data(!toks.empty(), "article with empty title in catalog");
            for (int64_t l = 0; l < L; ++l) {
                if (l < static_cast<int64_t>(toks.size())) {
                    const int32_t t = toks[static_cast<size_t>(l)];
                    check_data(t >= 0 && t < vocab_size_, "title token out of range");
                    title_idx_->push_back(t);
                    token_valid_.data()[c * L + l] = S(1);
                } else {
                    title_idx_->push_back(kPadToken);
                }
            }
        }
        zero_row_ = Tensor<S>::zeros({1, cfg_.dim});
    }

    void init_params(uint64_t seed) {
        Rng rng(seed);
        auto tn = [&](Shape shape) {
            Tensor<S> t = Tensor<S>::zeros(shape, true);
            for (int64_t i = 0; i < t.numel(); ++i)
                t.data()[i] = static_cast<S>(rng.truncated_normal(0.02));
            return t;
        };
        word_emb_ = tn({vocab_size_, cfg_.word_dim});
        word_pos_ = tn({cfg_.title_len, cfg_.word_dim});
        word_proj_ = tn({cfg_.word_dim, cfg_.dim});
        news_blocks_.resize(static_cast<size_t>(cfg_.news_blocks));
        for (auto& b : news_blocks_) b.init(cfg_.dim, rng, static_cast<S>(0.02));
        news_query_ = tn({cfg_.dim, 1});
        mask_emb_ = tn({1, cfg_.dim});
        pos_emb_ = tn({cfg_.history, cfg_.dim});
        user_blocks_.resize(static_cast<size_t>(cfg_.blocks));
        for (auto& b : user_blocks_) b.init(cfg_.dim, rng, static_cast<S>(0.02));
        mp_ = tn({cfg_.dim, cfg_.dim});
        bp_ = Tensor<S>::zeros({cfg_.dim}, true);
        bo_ = Tensor<S>::zeros({catalog_size_}, true);
    }

    void load_word_embeddings(const Catalog& catalog) {
        std::ifstream in(cfg_.embedding_file);
        check_data(static_cast<bool>(in),
                   "cannot open embedding file: " + cfg_.embedding_file);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::istringstream is(line);
            std::string word;
            is >> word;
            const int32_t idx = catalog.vocab.lookup(word);
            std::vector<double> vals;
            double v;
            while (is >> v) vals.push_back(v);
            check_data(static_cast<int64_t>(vals.size()) == cfg_.word_dim,
                       "embedding width mismatch for word '" + word + "'");
            if (idx == kUnkToken && word != "[UNK]") continue;
            for (int64_t i = 0; i < cfg_.word_dim; ++i)
                word_emb_.data()[idx * cfg_.word_dim + i] = static_cast<S>(vals[i]);
        }
    }

    void collect_params() {
        names_.clear();
        params_.clear();
        names_.push_back("word_emb");
        params_.push_back(word_emb_);
        names_.push_back("word_pos");
        params_.push_back(word_pos_);
        names_.push_back("word_proj");
        params_.push_back(word_proj_);
        for (size_t i = 0; i < news_blocks_.size(); ++i)
            news_blocks_[i].collect("news.block" + std::to_string(i), &names_, &params_);
        names_.push_back("news_query");
        params_.push_back(news_query_);
        names_.push_back("mask_emb");
        params_.push_back(mask_emb_);
        names_.push_back("pos_emb");
        params_.push_back(pos_emb_);
        for (size_t i = 0; i < user_blocks_.size(); ++i)
            user_blocks_[i].collect("user.block" + std::to_string(i), &names_, &params_);
        names_.push_back("pred.mp");
        params_.push_back(mp_);
        names_.push_back("pred.bp");
        params_.push_back(bp_);
        names_.push_back("pred.bo");
        params_.push_back(bo_);
    }

    ModelConfig cfg_;
    int64_t vocab_size_ = 0;
    int64_t catalog_size_ = 0;

    std::shared_ptr<std::vector<int64_t>> title_idx_;
    Tensor<S> token_valid_;  // [C, title_len] 0/1
    Tensor<S> zero_row_;     // [1, d] const

    Tensor<S> word_emb_, word_pos_, word_proj_, news_query_;
    std::vector<BlockParams<S>> news_blocks_;
    Tensor<S> mask_emb_, pos_emb_;
    std::vector<BlockParams<S>> user_blocks_;
    Tensor<S> mp_, bp_, bo_;

    std::vector<std::string> names_;
    std::vector<Tensor<S>> params_;
};

}  // namespace dcan
