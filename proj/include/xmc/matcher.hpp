// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "xmc/detail/parallel.hpp"
#include "xmc/indexer.hpp"
#include "xmc/linear.hpp"
#include "xmc/sparse.hpp"

namespace xmc {

/// Per instance, a list of (cluster or label id, probability).
using ranked_list = std::vector<scored_id>;

/// M[i,k] = 1 iff instance i has a positive label in cluster k.
inline sparse_matrix build_targets(const sparse_matrix& Y, const cluster_assignment& assign) {
    if (Y.cols() != assign.num_labels())
        throw error(errc::dimension_mismatch, "label matrix has " + std::to_string(Y.cols()) +
                                                  " columns, assignment covers " +
                                                  std::to_string(assign.num_labels()) + " labels");
    sparse_matrix M(assign.K);
    std::vector<index_t> clusters;
    for (std::size_t i = 0; i < Y.rows(); ++i) {
        clusters.clear();
        for (index_t l : Y.row(i).indices) clusters.push_back(assign.label_to_cluster[l]);
        std::sort(clusters.begin(), clusters.end());
        clusters.erase(std::unique(clusters.begin(), clusters.end()), clusters.end());
        std::vector<double> ones(clusters.size(), 1.0);
        M.append_row({clusters, ones, assign.K});
    }
    return M;
}

/// One-vs-all linear scorers over K clusters with sigmoid calibration.
struct matcher_model {
    linear_block scorers;
    std::vector<std::string> warnings;

    std::size_t K() const noexcept { return scorers.size(); }
    std::size_t feature_dim() const noexcept { return scorers.feature_dim(); }
};

/// Weights 0 and bias -1: the classifier used for targets with no positives.
inline linear_model constant_negative(std::size_t dim) { return {sparse_vector(dim), -1.0}; }

inline linear_block assemble_block(std::size_t dim, const std::vector<linear_model>& models) {
    sparse_matrix w(dim);
    std::vector<double> bias;
    bias.reserve(models.size());
    for (const auto& m : models) {
        w.append_row(m.weights.view());
        bias.push_back(m.bias);
    }
    return linear_block(std::move(w), std::move(bias));
}

/// Independent squared-hinge problem per cluster over all training rows.
inline matcher_model train_matcher(const sparse_matrix& X, const sparse_matrix& M, const solver_options& opts = {}) {
    if (X.rows() != M.rows())
        throw error(errc::dimension_mismatch, "features have " + std::to_string(X.rows()) + " rows, targets " +
                                                  std::to_string(M.rows()));
    if (X.rows() == 0) throw error(errc::bad_input, "cannot train a matcher on zero instances");
    const std::size_t K = M.cols();
    sparse_matrix by_cluster = M.transpose();
    std::vector<index_t> all(X.rows());
    std::iota(all.begin(), all.end(), 0);

    std::vector<linear_model> models(K);
    std::vector<char> no_positive(K, 0);
    detail::parallel_for(K, [&](std::size_t k) {
        auto pos = by_cluster.row(k);
        if (pos.empty()) {
            models[k] = constant_negative(X.cols());
            no_positive[k] = 1;
            return;
        }
        std::vector<int> y(X.rows(), -1);
        for (index_t i : pos.indices) y[i] = 1;
        solver_options o = opts;
        o.seed = detail::derive_seed(opts.seed, k);
        models[k] = train_ova_squared_hinge(X, all, y, o).model;
    });

    matcher_model model{assemble_block(X.cols(), models), {}};
    for (std::size_t k = 0; k < K; ++k)
        if (no_positive[k])
            model.warnings.push_back("cluster " + std::to_string(k) + " has no positive instances");
    return model;
}

/// Sigmoid probability of every cluster for `x`, top `beam` kept.
inline ranked_list match(const matcher_model& model, sparse_view x, std::size_t beam) {
    std::vector<double> s(model.K());
    model.scorers.margins(x, s);
    ranked_list all(model.K());
    for (std::size_t k = 0; k < model.K(); ++k) all[k] = {static_cast<index_t>(k), sigmoid(s[k])};
    return top_k(std::move(all), beam);
}

inline std::vector<ranked_list> match_all(const matcher_model& model, const sparse_matrix& X, std::size_t beam) {
    std::vector<ranked_list> out(X.rows());
    detail::parallel_for(X.rows(), [&](std::size_t i) { out[i] = match(model, X.row(i), beam); });
    return out;
}

inline void save_matcher(const std::string& path, const matcher_model& model) {
    save_linear_block(path, model.scorers);
}

inline matcher_model load_matcher(const std::string& path) { return {load_linear_block(path), {}}; }

// Score file: "instance_id cluster:prob cluster:prob ..." per line. The
// same layout carries ranked label predictions.

inline void write_ranked_lists(std::ostream& out, const std::vector<ranked_list>& lists, int decimals) {
    for (std::size_t i = 0; i < lists.size(); ++i) {
        out << i;
        for (const auto& e : lists[i])
            out << ' ' << e.id << ':'
                << (decimals < 0 ? detail::format_exact(e.score) : detail::format_fixed(e.score, decimals));
        out << '\n';
    }
}

/// Parses the shared "id key:value ..." layout. Instance ids may be sparse;
/// missing instances yield empty lists. Calls `check(key, value)` per entry
/// and reports failures as `code` with the line number.
template <typename Check>
std::vector<ranked_list> read_ranked_lists(std::istream& in, errc code, Check&& check) {
    std::vector<ranked_list> lists;
    std::vector<char> seen;
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& what) {
        return error(code, what + " (line " + std::to_string(line_no) + ")");
    };
    while (std::getline(in, line)) {
        ++line_no;
        auto toks = detail::split_ws(line);
        if (toks.empty()) continue;
        std::size_t inst = 0;
        if (!detail::parse_int(toks[0], inst)) throw fail("bad instance id '" + std::string(toks[0]) + "'");
        if (inst >= lists.size()) {
            lists.resize(inst + 1);
            seen.resize(inst + 1, 0);
        }
        if (seen[inst]) throw fail("duplicate instance id " + std::to_string(inst));
        seen[inst] = 1;
        ranked_list entries;
        for (std::size_t t = 1; t < toks.size(); ++t) {
            std::string_view k, v;
            scored_id e;
            if (!detail::split_pair(toks[t], k, v) || !detail::parse_int(k, e.id) || !detail::parse_double(v, e.score))
                throw fail("malformed entry '" + std::string(toks[t]) + "'");
            if (auto msg = check(e); !msg.empty()) throw fail(msg);
            for (const auto& prev : entries)
                if (prev.id == e.id) throw fail("duplicate id " + std::to_string(e.id));
            entries.push_back(e);
        }
        lists[inst] = std::move(entries);
    }
    return lists;
}

inline std::vector<ranked_list> import_scores(std::istream& in, std::size_t K) {
    return read_ranked_lists(in, errc::bad_score_file, [K](const scored_id& e) -> std::string {
        if (e.id >= K) return "cluster id " + std::to_string(e.id) + " >= K=" + std::to_string(K);
        if (!(e.score >= 0.0 && e.score <= 1.0)) return "probability " + detail::format_exact(e.score) + " outside [0,1]";
        return {};
    });
}

/// Reads externally produced matcher probabilities; interchangeable with
/// `match_all` output.
inline std::vector<ranked_list> import_scores(const std::string& path, std::size_t K) {
    std::ifstream in(path);
    if (!in) throw error(errc::bad_score_file, "cannot open '" + path + "'");
    return import_scores(in, K);
}

inline void export_scores(const std::string& path, const std::vector<ranked_list>& lists) {
    auto out = detail::open_out(path);
    write_ranked_lists(out, lists, -1);
}

} // namespace xmc
