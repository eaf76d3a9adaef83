// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "xmc/dataset.hpp"
#include "xmc/detail/hash.hpp"
#include "xmc/embedding.hpp"
#include "xmc/evaluator.hpp"
#include "xmc/indexer.hpp"
#include "xmc/matcher.hpp"
#include "xmc/ranker.hpp"
#include "xmc/text.hpp"

namespace xmc {

inline constexpr int artifact_format_version = 1;
inline constexpr double default_weight_threshold = 0.01;

struct pipeline_config {
    std::size_t K = 64;
    std::uint64_t seed = 0;
    /// One pipeline member per entry; more than one member is ensembled.
    std::vector<embedding_kind> members{embedding_kind::pifa};
    double C = 1.0;
    std::size_t beam = default_beam;
    std::size_t top_k = default_top_k;
    std::size_t min_df = 1;
    ranker_kind ranker = ranker_kind::linear;
    std::size_t random_dim = 64;
    /// Held-out share of the training file; 0 trains on all of it.
    double valid_fraction = 0.1;
    std::vector<std::size_t> ks{1, 3, 5};
    std::string word_embeddings;
    std::string label_texts;
    /// Stored matcher and ranker weights below this magnitude are dropped.
    double weight_threshold = default_weight_threshold;
    solver_options solver{};

    void validate() const {
        if (!is_power_of_two(K)) throw error(errc::bad_k, "K=" + std::to_string(K) + " is not a power of two");
        if (members.empty()) throw error(errc::bad_input, "at least one pipeline member is required");
        if (beam == 0 || top_k == 0 || min_df == 0 || random_dim == 0)
            throw error(errc::bad_input, "beam, top_k, min_df and random_dim must be positive");
        if (!(C > 0.0)) throw error(errc::bad_input, "C must be positive");
        if (!(weight_threshold >= 0.0)) throw error(errc::bad_input, "weight threshold must be non-negative");
        if (valid_fraction < 0.0 || valid_fraction >= 1.0) throw error(errc::bad_input, "valid fraction must be in [0, 1)");
        for (auto m : members)
            if (m == embedding_kind::text && (word_embeddings.empty() || label_texts.empty()))
                throw error(errc::bad_input, "text embeddings need --word-emb and --label-texts");
    }

    nlohmann::json to_json() const {
        std::vector<std::string> names;
        for (auto m : members) names.emplace_back(to_string(m));
        return {{"K", K},
                {"seed", seed},
                {"members", names},
                {"C", C},
                {"beam", beam},
                {"top_k", top_k},
                {"min_df", min_df},
                {"ranker", std::string(to_string(ranker))},
                {"random_dim", random_dim},
                {"valid_fraction", valid_fraction},
                {"ks", ks},
                {"word_embeddings", word_embeddings},
                {"label_texts", label_texts},
                {"weight_threshold", weight_threshold},
                {"solver", {{"max_iters", solver.max_iters}, {"tol", solver.tol}, {"bias", solver.bias}}}};
    }
};

/// Stage counters for seed derivation; every stage draws from
/// derive_seed(config.seed, stage + member offset).
enum class stage : std::uint64_t { split = 1, embed = 2, index = 3, matcher = 4, ranker = 5 };

inline std::uint64_t stage_seed(std::uint64_t seed, stage s, std::size_t member = 0) {
    return detail::derive_seed(seed, static_cast<std::uint64_t>(s) + 16 * member);
}

struct member_result {
    embedding_kind kind;
    cluster_assignment clusters;
    std::vector<ranked_list> test_predictions;
    metric_report report;
    std::vector<std::string> warnings;
};

struct pipeline_result {
    std::vector<member_result> members;
    std::vector<ranked_list> predictions;
    metric_report report;
    std::optional<metric_report> valid_report;
    std::string manifest_path;
};

namespace detail {

inline std::string file_hash(const std::string& path) { return hex64(fnv1a(read_file(path))); }

template <typename Fn>
auto run_stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const error& e) {
        throw error(e.code(), "stage '" + name + "' failed: " + e.what());
    } catch (const std::exception& e) {
        throw error(errc::bad_input, "stage '" + name + "' failed: " + e.what());
    }
}

inline std::vector<token_sequence> tokenize_all(const std::vector<std::string>& docs) {
    std::vector<token_sequence> out(docs.size());
    parallel_for(docs.size(), [&](std::size_t i) { out[i] = tokenize(docs[i]); });
    return out;
}

} // namespace detail

/// Featurize, embed, index, train matcher and ranker, predict and evaluate,
/// once per configured member, then ensemble. Every artifact lands under
/// `out_dir` and `manifest.json` records the config and content hashes.
inline pipeline_result run_pipeline(const pipeline_config& config, const std::string& train_path,
                                    const std::string& test_path, const std::string& out_dir,
                                    std::ostream* log = nullptr) {
    namespace fs = std::filesystem;
    config.validate();
    fs::create_directories(out_dir);
    auto path = [&](const std::string& name) { return (fs::path(out_dir) / name).string(); };
    auto say = [&](const std::string& msg) {
        if (log) *log << "[xmc] " << msg << std::endl;
    };

    nlohmann::json manifest;
    manifest["format_version"] = artifact_format_version;
    manifest["config"] = config.to_json();
    manifest["inputs"] = {{"train", {{"path", train_path}, {"hash", detail::file_hash(train_path)}}},
                          {"test", {{"path", test_path}, {"hash", detail::file_hash(test_path)}}}};
    if (!config.word_embeddings.empty()) manifest["inputs"]["word_embeddings"] = detail::file_hash(config.word_embeddings);
    if (!config.label_texts.empty()) manifest["inputs"]["label_texts"] = detail::file_hash(config.label_texts);
    nlohmann::json artifacts = nlohmann::json::object();
    auto record = [&](const std::string& name) { artifacts[name] = detail::file_hash(path(name)); };

    // load and split
    auto [train, valid, test] = detail::run_stage("load", [&] {
        auto full = load_dataset(train_path, split_tag::train);
        if (!config.label_texts.empty()) full.label_texts = load_label_texts(config.label_texts);
        std::optional<dataset> va;
        dataset tr;
        if (config.valid_fraction > 0.0) {
            auto [a, b] = split_validation(full, config.valid_fraction, stage_seed(config.seed, stage::split));
            tr = std::move(a);
            if (b.size() > 0) va = std::move(b);
        } else {
            tr = std::move(full);
        }
        auto te = load_dataset(test_path, split_tag::test, tr.num_labels);
        return std::tuple{std::move(tr), std::move(va), std::move(te)};
    });
    say("train " + std::to_string(train.size()) + ", valid " + std::to_string(valid ? valid->size() : 0) + ", test " +
        std::to_string(test.size()) + ", labels " + std::to_string(train.num_labels));

    // featurize
    auto [vocab, X_train, X_valid, X_test] = detail::run_stage("featurize", [&] {
        auto train_tokens = detail::tokenize_all(train.docs);
        auto v = build_vocab(train_tokens, config.min_df);
        auto xt = tfidf_matrix(train_tokens, v);
        std::optional<sparse_matrix> xv;
        if (valid) xv = tfidf_matrix(detail::tokenize_all(valid->docs), v);
        auto xs = tfidf_matrix(detail::tokenize_all(test.docs), v);
        return std::tuple{std::move(v), std::move(xt), std::move(xv), std::move(xs)};
    });
    const sparse_matrix Y_train = train.label_matrix();
    const sparse_matrix Y_test = test.label_matrix();
    save_vocabulary(path("vocab.tsv"), vocab);
    save_sparse_matrix(path("X_train.smat"), X_train);
    save_sparse_matrix(path("Y_train.smat"), Y_train);
    save_sparse_matrix(path("X_test.smat"), X_test);
    save_sparse_matrix(path("Y_test.smat"), Y_test);
    for (auto n : {"vocab.tsv", "X_train.smat", "Y_train.smat", "X_test.smat", "Y_test.smat"}) record(n);
    say("vocabulary " + std::to_string(vocab.size()) + " tokens");

    std::optional<word_embedding_table> words;
    if (!config.word_embeddings.empty())
        words = detail::run_stage("embed", [&] { return load_word_embeddings(config.word_embeddings); });

    pipeline_result result;
    std::vector<std::vector<ranked_list>> member_preds, member_valid;
    std::optional<label_embeddings> pifa_cache;
    for (std::size_t m = 0; m < config.members.size(); ++m) {
        const auto kind = config.members[m];
        const std::string dir = "member_" + std::to_string(m) + "_" + std::string(to_string(kind));
        fs::create_directories(path(dir));
        auto mpath = [&](const std::string& name) { return dir + "/" + name; };
        member_result mr;
        mr.kind = kind;

        auto emb = detail::run_stage("embed", [&] {
            switch (kind) {
            case embedding_kind::pifa: return pifa_embed(Y_train, X_train);
            case embedding_kind::text:
                if (train.label_texts.size() < train.num_labels)
                    throw error(errc::bad_input, "label text file has fewer lines than labels");
                return text_embed({train.label_texts.begin(), train.label_texts.begin() +
                                                                  static_cast<std::ptrdiff_t>(train.num_labels)},
                                  *words);
            case embedding_kind::random:
                return random_embed(train.num_labels, config.random_dim, stage_seed(config.seed, stage::embed, m));
            }
            throw error(errc::bad_input, "unknown embedding kind");
        });
        save_label_embeddings(path(mpath("labels.emb")), emb);
        record(mpath("labels.emb"));

        mr.clusters = detail::run_stage("index", [&] {
            return build_index(emb, config.K, stage_seed(config.seed, stage::index, m));
        });
        save_cluster_assignment(path(mpath("clusters.txt")), mr.clusters);
        record(mpath("clusters.txt"));
        say(dir + ": indexed " + std::to_string(train.num_labels) + " labels into " + std::to_string(config.K) +
            " clusters");

        solver_options so = config.solver;
        so.C = config.C;
        so.weight_threshold = config.weight_threshold;
        auto matcher = detail::run_stage("train-matcher", [&] {
            so.seed = stage_seed(config.seed, stage::matcher, m);
            return train_matcher(X_train, build_targets(Y_train, mr.clusters), so);
        });
        save_matcher(path(mpath("matcher.model")), matcher);
        record(mpath("matcher.model"));
        say(dir + ": matcher trained");

        auto ranker = detail::run_stage("train-ranker", [&] {
            if (config.ranker == ranker_kind::tfidf) {
                if (!pifa_cache) pifa_cache = kind == embedding_kind::pifa ? emb : pifa_embed(Y_train, X_train);
                return make_tfidf_ranker(*pifa_cache, mr.clusters);
            }
            so.seed = stage_seed(config.seed, stage::ranker, m);
            return train_ranker(X_train, Y_train, mr.clusters, so);
        });
        save_ranker(path(mpath("ranker")), ranker);
        say(dir + ": ranker trained");

        mr.warnings = matcher.warnings;
        mr.warnings.insert(mr.warnings.end(), ranker.warnings.begin(), ranker.warnings.end());

        detail::run_stage("predict", [&] {
            auto matched = match_all(matcher, X_test, config.beam);
            export_scores(path(mpath("test.scores")), matched);
            mr.test_predictions = predict_all(matched, ranker, X_test, config.top_k);
            save_predictions(path(mpath("test.pred")), mr.test_predictions);
            if (X_valid)
                member_valid.push_back(predict_all(match_all(matcher, *X_valid, config.beam), ranker, *X_valid,
                                                   config.top_k));
            return 0;
        });
        record(mpath("test.scores"));
        record(mpath("test.pred"));

        mr.report = evaluate(mr.test_predictions, Y_test, config.ks);
        {
            auto out = detail::open_out(path(mpath("report.kv")));
            write_report_kv(out, mr.report);
        }
        say(dir + ": P@1 " + detail::format_fixed(mr.report.precision.front(), 4));
        member_preds.push_back(mr.test_predictions);
        result.members.push_back(std::move(mr));
    }

    if (member_preds.size() == 1) {
        result.predictions = member_preds.front();
    } else {
        result.predictions = detail::run_stage("ensemble", [&] { return ensemble(member_preds, config.top_k); });
    }
    save_predictions(path("test.pred"), result.predictions);
    record("test.pred");
    result.report = evaluate(result.predictions, Y_test, config.ks);
    if (valid) {
        auto vp = member_valid.size() == 1 ? member_valid.front() : ensemble(member_valid, config.top_k);
        result.valid_report = evaluate(vp, valid->label_matrix(), config.ks);
    }
    {
        auto out = detail::open_out(path("report.kv"));
        write_report_kv(out, result.report);
        auto txt = detail::open_out(path("report.txt"));
        write_report_text(txt, result.report);
    }
    record("report.kv");

    manifest["artifacts"] = artifacts;
    result.manifest_path = path("manifest.json");
    auto out = detail::open_out(result.manifest_path);
    out << manifest.dump(2) << '\n';
    return result;
}

} // namespace xmc
