// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "xmc/detail/parallel.hpp"
#include "xmc/embedding.hpp"
#include "xmc/indexer.hpp"
#include "xmc/linear.hpp"
#include "xmc/matcher.hpp"

namespace xmc {

enum class ranker_kind { linear, tfidf };

inline std::string_view to_string(ranker_kind k) noexcept { return k == ranker_kind::linear ? "linear" : "tfidf"; }

inline ranker_kind parse_ranker_kind(std::string_view s) {
    if (s == "linear") return ranker_kind::linear;
    if (s == "tfidf") return ranker_kind::tfidf;
    throw error(errc::bad_input, "unknown ranker kind '" + std::string(s) + "'");
}

/// Within-cluster label scorers. Linear rankers keep one `linear_block` per
/// cluster whose rows follow `clusters.cluster_to_labels[k]`; the tf-idf
/// ranker scores by cosine against PIFA label embeddings instead.
struct ranker_model {
    ranker_kind kind = ranker_kind::linear;
    cluster_assignment clusters;
    std::vector<linear_block> blocks;
    std::optional<label_embeddings> pifa;
    std::vector<std::string> warnings;

    std::size_t feature_dim() const {
        if (kind == ranker_kind::tfidf) return pifa->dim();
        return blocks.empty() ? 0 : blocks.front().feature_dim();
    }
};

/// Cosine of x against the label's PIFA row, clamped to [0, 1]; 0 for labels
/// without an embedding.
inline double tfidf_ranker_score(sparse_view x, const label_embeddings& pifa, index_t label) {
    if (pifa.kind() != embedding_kind::pifa) throw error(errc::bad_input, "tf-idf ranker needs PIFA embeddings");
    if (pifa.is_empty(label)) return 0.0;
    return std::clamp(dot(x, pifa.sparse().row(label)), 0.0, 1.0);
}

/// Per cluster k, the pool is every training instance with a positive in
/// I_k. Each label of I_k gets a squared-hinge classifier separating the
/// pool members positive for it from the rest of the pool.
inline ranker_model train_ranker(const sparse_matrix& X, const sparse_matrix& Y, const cluster_assignment& assign,
                                 const solver_options& opts = {}) {
    if (X.rows() != Y.rows())
        throw error(errc::dimension_mismatch, "features have " + std::to_string(X.rows()) + " rows, labels " +
                                                  std::to_string(Y.rows()));
    sparse_matrix pools = build_targets(Y, assign).transpose();
    sparse_matrix by_label = Y.transpose();

    struct task {
        index_t cluster, label;
        std::size_t slot;
    };
    std::vector<task> tasks;
    std::vector<std::vector<linear_model>> models(assign.K);
    for (std::size_t k = 0; k < assign.K; ++k) {
        models[k].resize(assign.cluster_to_labels[k].size());
        for (std::size_t s = 0; s < assign.cluster_to_labels[k].size(); ++s)
            tasks.push_back({static_cast<index_t>(k), assign.cluster_to_labels[k][s], s});
    }
    std::vector<char> no_positive(tasks.size(), 0);
    detail::parallel_for(tasks.size(), [&](std::size_t t) {
        const auto& tk = tasks[t];
        auto pool = pools.row(tk.cluster).indices;
        auto positives = by_label.row(tk.label).indices;
        if (pool.empty() || positives.empty()) {
            models[tk.cluster][tk.slot] = constant_negative(X.cols());
            no_positive[t] = 1;
            return;
        }
        // every positive instance of the label is in its cluster's pool
        std::vector<int> y(pool.size(), -1);
        std::size_t p = 0;
        for (std::size_t i = 0; i < pool.size() && p < positives.size(); ++i) {
            if (pool[i] == positives[p]) {
                y[i] = 1;
                ++p;
            }
        }
        solver_options o = opts;
        o.seed = detail::derive_seed(opts.seed, tk.label);
        models[tk.cluster][tk.slot] = train_ova_squared_hinge(X, pool, y, o).model;
    });

    ranker_model r;
    r.kind = ranker_kind::linear;
    r.clusters = assign;
    r.blocks.reserve(assign.K);
    for (std::size_t k = 0; k < assign.K; ++k) {
        r.blocks.push_back(assemble_block(X.cols(), models[k]));
        std::vector<linear_model>().swap(models[k]);
    }
    for (std::size_t t = 0; t < tasks.size(); ++t)
        if (no_positive[t]) r.warnings.push_back("label " + std::to_string(tasks[t].label) + " has no positives in its pool");
    return r;
}

inline ranker_model make_tfidf_ranker(label_embeddings pifa, const cluster_assignment& assign) {
    if (pifa.kind() != embedding_kind::pifa) throw error(errc::bad_input, "tf-idf ranker needs PIFA embeddings");
    if (pifa.size() != assign.num_labels()) throw error(errc::dimension_mismatch, "embedding/assignment label count mismatch");
    ranker_model r;
    r.kind = ranker_kind::tfidf;
    r.clusters = assign;
    r.pifa = std::move(pifa);
    return r;
}

/// P(y_l | I_k, x) for every label of cluster k, in cluster order.
inline void score_cluster(const ranker_model& ranker, index_t k, sparse_view x, std::span<double> out) {
    const auto& labels = ranker.clusters.cluster_to_labels.at(k);
    if (ranker.kind == ranker_kind::tfidf) {
        for (std::size_t s = 0; s < labels.size(); ++s) out[s] = tfidf_ranker_score(x, *ranker.pifa, labels[s]);
        return;
    }
    ranker.blocks[k].margins(x, out);
    for (double& v : out) v = sigmoid(v);
}

inline constexpr std::size_t default_top_k = 10;
inline constexpr std::size_t default_beam = 10;

/// Combines matcher and ranker: each label of a retrieved cluster scores
/// P(I_k | x) * P(y_l | I_k, x). Clusters partition the labels, so the
/// mixture over clusters has a single nonzero term per label and labels
/// outside the retrieved clusters are never scored.
inline ranked_list predict(const ranked_list& matched, const ranker_model& ranker, sparse_view x, std::size_t top_k_) {
    if (top_k_ == 0) throw error(errc::bad_input, "top_k must be at least 1");
    ranked_list candidates;
    std::vector<double> probs;
    for (const auto& [k, p_cluster] : matched) {
        if (k >= ranker.clusters.K)
            throw error(errc::bad_input, "matched cluster " + std::to_string(k) + " >= K");
        const auto& labels = ranker.clusters.cluster_to_labels[k];
        probs.resize(labels.size());
        score_cluster(ranker, k, x, probs);
        for (std::size_t s = 0; s < labels.size(); ++s) candidates.push_back({labels[s], p_cluster * probs[s]});
    }
    return top_k(std::move(candidates), top_k_);
}

/// Instances beyond the end of `matched` get empty predictions.
inline std::vector<ranked_list> predict_all(const std::vector<ranked_list>& matched, const ranker_model& ranker,
                                            const sparse_matrix& X, std::size_t top_k_) {
    std::vector<ranked_list> out(X.rows());
    std::size_t n = std::min(matched.size(), X.rows());
    detail::parallel_for(n, [&](std::size_t i) { out[i] = predict(matched[i], ranker, X.row(i), top_k_); });
    return out;
}

/// Mean score per (instance, label) across models, a label missing from a
/// model counting as 0. Scores are summed in sorted order so the result
/// does not depend on model order.
inline std::vector<ranked_list> ensemble(const std::vector<std::vector<ranked_list>>& models, std::size_t top_k_) {
    if (models.empty()) throw error(errc::ensemble_mismatch, "nothing to ensemble");
    if (top_k_ == 0) throw error(errc::bad_input, "top_k must be at least 1");
    const std::size_t n = models.front().size();
    for (const auto& m : models)
        if (m.size() != n)
            throw error(errc::ensemble_mismatch, "prediction sets cover " + std::to_string(n) + " and " +
                                                     std::to_string(m.size()) + " instances");
    const double M = static_cast<double>(models.size());
    std::vector<ranked_list> out(n);
    std::vector<std::pair<index_t, double>> entries;
    for (std::size_t i = 0; i < n; ++i) {
        entries.clear();
        for (const auto& m : models)
            for (const auto& e : m[i]) entries.emplace_back(e.id, e.score);
        std::sort(entries.begin(), entries.end());
        ranked_list merged;
        for (std::size_t p = 0; p < entries.size();) {
            index_t id = entries[p].first;
            double sum = 0.0;
            for (; p < entries.size() && entries[p].first == id; ++p) sum += entries[p].second;
            merged.push_back({id, sum / M});
        }
        out[i] = top_k(std::move(merged), top_k_);
    }
    return out;
}

// Prediction file: "instance_id label:score ..." per line, 6 decimals, descending.

inline constexpr int prediction_decimals = 6;

inline void save_predictions(const std::string& path, const std::vector<ranked_list>& preds) {
    auto out = detail::open_out(path);
    write_ranked_lists(out, preds, prediction_decimals);
}

inline std::vector<ranked_list> load_predictions(const std::string& path) {
    auto in = detail::open_in(path);
    return read_ranked_lists(in, errc::parse_error, [](const scored_id& e) -> std::string {
        if (!(e.score >= 0.0 && e.score <= 1.0)) return "score outside [0,1]";
        return {};
    });
}

// Ranker directory: "manifest.txt" holds "kind K L feature_dim" and one
// "cluster n label..." line per cluster; linear rankers store
// "cluster_<k>.model" per cluster, tf-idf rankers "pifa.emb".

inline void save_ranker(const std::string& dir, const ranker_model& r) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    auto out = detail::open_out((fs::path(dir) / "manifest.txt").string());
    out << to_string(r.kind) << ' ' << r.clusters.K << ' ' << r.clusters.num_labels() << ' ' << r.feature_dim() << '\n';
    for (std::size_t k = 0; k < r.clusters.K; ++k) {
        const auto& labels = r.clusters.cluster_to_labels[k];
        out << k << ' ' << labels.size();
        for (index_t l : labels) out << ' ' << l;
        out << '\n';
    }
    if (r.kind == ranker_kind::tfidf) {
        save_label_embeddings((fs::path(dir) / "pifa.emb").string(), *r.pifa);
        return;
    }
    for (std::size_t k = 0; k < r.clusters.K; ++k)
        save_linear_block((fs::path(dir) / ("cluster_" + std::to_string(k) + ".model")).string(), r.blocks[k]);
}

inline ranker_model load_ranker(const std::string& dir) {
    namespace fs = std::filesystem;
    auto in = detail::open_in((fs::path(dir) / "manifest.txt").string());
    std::string line;
    std::size_t line_no = 1, K = 0, L = 0, dim = 0;
    if (!std::getline(in, line)) throw detail::parse_failure("missing manifest header", line_no);
    auto head = detail::split_ws(line);
    if (head.size() != 4 || !detail::parse_int(head[1], K) || !detail::parse_int(head[2], L) ||
        !detail::parse_int(head[3], dim))
        throw detail::parse_failure("bad manifest header", line_no);
    ranker_kind kind = parse_ranker_kind(head[0]);
    std::vector<index_t> map(L, 0);
    std::vector<char> seen(L, 0);
    for (std::size_t k = 0; k < K; ++k) {
        if (!std::getline(in, line)) throw detail::parse_failure("truncated manifest", line_no + 1);
        ++line_no;
        auto toks = detail::split_ws(line);
        std::size_t id = 0, n = 0;
        if (toks.size() < 2 || !detail::parse_int(toks[0], id) || id != k || !detail::parse_int(toks[1], n) ||
            toks.size() != n + 2)
            throw detail::parse_failure("bad cluster line", line_no);
        for (std::size_t s = 0; s < n; ++s) {
            index_t l = 0;
            if (!detail::parse_int(toks[s + 2], l) || l >= L || seen[l])
                throw detail::parse_failure("bad label id", line_no);
            seen[l] = 1;
            map[l] = static_cast<index_t>(k);
        }
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end())
        throw error(errc::parse_error, "ranker manifest does not cover every label");
    auto assign = cluster_assignment::from_label_map(K, std::move(map), 0, embedding_kind::pifa);
    if (kind == ranker_kind::tfidf)
        return make_tfidf_ranker(load_label_embeddings((fs::path(dir) / "pifa.emb").string()), assign);
    ranker_model r;
    r.kind = kind;
    r.clusters = std::move(assign);
    for (std::size_t k = 0; k < K; ++k) {
        r.blocks.push_back(load_linear_block((fs::path(dir) / ("cluster_" + std::to_string(k) + ".model")).string()));
        if (r.blocks.back().size() != r.clusters.cluster_to_labels[k].size() || r.blocks.back().feature_dim() != dim)
            throw error(errc::parse_error, "cluster " + std::to_string(k) + " model does not match manifest");
    }
    return r;
}

} // namespace xmc
