// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "xmc/detail/parallel.hpp"
#include "xmc/detail/text_io.hpp"
#include "xmc/sparse.hpp"
#include "xmc/text.hpp"

namespace xmc {

enum class embedding_kind { pifa, text, random };

inline std::string_view to_string(embedding_kind k) noexcept {
    switch (k) {
    case embedding_kind::pifa: return "pifa";
    case embedding_kind::text: return "text";
    case embedding_kind::random: return "random";
    }
    return "?";
}

inline embedding_kind parse_embedding_kind(std::string_view s) {
    if (s == "pifa" || s == "PIFA") return embedding_kind::pifa;
    if (s == "text" || s == "TEXT") return embedding_kind::text;
    if (s == "random" || s == "RANDOM") return embedding_kind::random;
    throw error(errc::bad_input, "unknown embedding kind '" + std::string(s) + "'");
}

/// One unit-norm row per label, sparse (PIFA) or dense (label text, random).
/// Labels without source data keep an all-zero row and are listed in
/// `empty_labels()`.
class label_embeddings {
  public:
    label_embeddings(embedding_kind kind, sparse_matrix rows, std::vector<index_t> empty)
        : kind_(kind), rows_(std::move(rows)), empty_(std::move(empty)) {
        init_flags();
    }

    label_embeddings(embedding_kind kind, std::size_t dim, std::vector<dense_vector> rows, std::vector<index_t> empty)
        : kind_(kind), rows_(dense_rows{dim, std::move(rows)}), empty_(std::move(empty)) {
        for (const auto& r : std::get<dense_rows>(rows_).rows)
            if (r.size() != dim) throw error(errc::dimension_mismatch, "dense embedding row has wrong length");
        init_flags();
    }

    embedding_kind kind() const noexcept { return kind_; }
    bool is_sparse() const noexcept { return std::holds_alternative<sparse_matrix>(rows_); }

    std::size_t size() const noexcept {
        return is_sparse() ? std::get<sparse_matrix>(rows_).rows() : std::get<dense_rows>(rows_).rows.size();
    }

    std::size_t dim() const noexcept {
        return is_sparse() ? std::get<sparse_matrix>(rows_).cols() : std::get<dense_rows>(rows_).dim;
    }

    const std::vector<index_t>& empty_labels() const noexcept { return empty_; }
    bool is_empty(index_t label) const { return is_empty_.at(label); }

    const sparse_matrix& sparse() const { return std::get<sparse_matrix>(rows_); }
    std::span<const double> dense_row(index_t label) const { return std::get<dense_rows>(rows_).rows.at(label); }

    /// Row as a sparse vector regardless of storage.
    sparse_vector row_sparse(index_t label) const {
        if (is_sparse()) return sparse().row_copy(label);
        return sparse_vector::from_dense(dense_row(label));
    }

    double dot(index_t label, std::span<const double> dense) const {
        if (is_sparse()) return xmc::dot(sparse().row(label), dense);
        return xmc::dot(dense_row(label), dense);
    }

    double dot(index_t a, index_t b) const {
        if (is_sparse()) return xmc::dot(sparse().row(a), sparse().row(b));
        return xmc::dot(dense_row(a), dense_row(b));
    }

    void add_to(index_t label, std::span<double> dense) const {
        if (is_sparse()) {
            axpy(1.0, sparse().row(label), dense);
        } else {
            auto r = dense_row(label);
            for (std::size_t j = 0; j < r.size(); ++j) dense[j] += r[j];
        }
    }

  private:
    struct dense_rows {
        std::size_t dim = 0;
        std::vector<dense_vector> rows;
    };

    void init_flags() {
        is_empty_.assign(size(), false);
        for (index_t l : empty_) {
            if (l >= size()) throw error(errc::bad_input, "empty label id out of range");
            is_empty_[l] = true;
        }
    }

    embedding_kind kind_;
    std::variant<sparse_matrix, dense_rows> rows_;
    std::vector<index_t> empty_;
    std::vector<bool> is_empty_;
};

/// Positive instance feature aggregation: each label's row is the
/// normalized sum of the feature rows of its positive instances.
inline label_embeddings pifa_embed(const sparse_matrix& Y, const sparse_matrix& X) {
    if (Y.rows() != X.rows())
        throw error(errc::dimension_mismatch, "label matrix has " + std::to_string(Y.rows()) +
                                                  " rows, features have " + std::to_string(X.rows()));
    const std::size_t L = Y.cols(), D = X.cols();
    sparse_matrix by_label = Y.transpose();
    std::vector<sparse_vector> rows(L, sparse_vector(D));
    detail::parallel_for(L, [&](std::size_t l) {
        auto inst = by_label.row(l);
        if (inst.empty()) return;
        std::vector<std::pair<index_t, double>> entries;
        for (index_t i : inst.indices) {
            auto x = X.row(i);
            for (std::size_t p = 0; p < x.nnz(); ++p) entries.emplace_back(x.indices[p], x.values[p]);
        }
        std::stable_sort(entries.begin(), entries.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        auto sum = sparse_vector::from_entries(D, std::move(entries));
        if (!sum.empty()) rows[l] = l2_normalize(sum.view());
    });
    std::vector<index_t> empty;
    for (std::size_t l = 0; l < L; ++l)
        if (rows[l].empty()) empty.push_back(static_cast<index_t>(l));
    return label_embeddings(embedding_kind::pifa, sparse_matrix::from_rows(D, rows), std::move(empty));
}

struct word_embedding_table {
    std::size_t dim = 0;
    std::unordered_map<std::string, dense_vector> vectors;

    const dense_vector* find(const std::string& tok) const {
        auto it = vectors.find(tok);
        return it == vectors.end() ? nullptr : &it->second;
    }
};

/// Mean of the table vectors of each label's in-table tokens, normalized.
inline label_embeddings text_embed(const std::vector<std::string>& label_texts, const word_embedding_table& table) {
    std::vector<dense_vector> rows(label_texts.size(), dense_vector(table.dim, 0.0));
    std::vector<char> empty_flag(label_texts.size(), 0);
    detail::parallel_for(label_texts.size(), [&](std::size_t l) {
        std::size_t hits = 0;
        for (const auto& tok : tokenize(label_texts[l])) {
            if (const auto* v = table.find(tok)) {
                for (std::size_t j = 0; j < table.dim; ++j) rows[l][j] += (*v)[j];
                ++hits;
            }
        }
        if (hits == 0 || squared_norm(rows[l]) == 0.0) {
            std::fill(rows[l].begin(), rows[l].end(), 0.0);
            empty_flag[l] = 1;
            return;
        }
        for (double& x : rows[l]) x /= static_cast<double>(hits);
        l2_normalize_inplace(rows[l]);
    });
    std::vector<index_t> empty;
    for (std::size_t l = 0; l < rows.size(); ++l)
        if (empty_flag[l]) empty.push_back(static_cast<index_t>(l));
    return label_embeddings(embedding_kind::text, table.dim, std::move(rows), std::move(empty));
}

/// Seeded Gaussian directions, normalized. Baseline for label indexing.
inline label_embeddings random_embed(std::size_t L, std::size_t dim, std::uint64_t seed) {
    if (dim == 0) throw error(errc::bad_input, "random embedding dim must be at least 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<dense_vector> rows(L, dense_vector(dim));
    for (auto& r : rows) {
        do {
            for (double& x : r) x = gauss(rng);
        } while (squared_norm(r) == 0.0);
        l2_normalize_inplace(r);
    }
    return label_embeddings(embedding_kind::random, dim, std::move(rows), {});
}

// Word-embedding file: "vocab_size dim", then "token v1 ... vdim" per line.

inline word_embedding_table load_word_embeddings(const std::string& path) {
    auto in = detail::open_in(path);
    std::string line;
    std::size_t line_no = 1, count = 0;
    word_embedding_table table;
    if (!std::getline(in, line)) throw detail::parse_failure("missing header", line_no);
    auto head = detail::split_ws(line);
    if (head.size() != 2 || !detail::parse_int(head[0], count) || !detail::parse_int(head[1], table.dim))
        throw detail::parse_failure("bad header, expected 'vocab_size dim'", line_no);
    while (std::getline(in, line)) {
        ++line_no;
        auto toks = detail::split_ws(line);
        if (toks.empty()) continue;
        if (toks.size() != table.dim + 1) throw detail::parse_failure("wrong number of components", line_no);
        dense_vector v(table.dim);
        for (std::size_t j = 0; j < table.dim; ++j)
            if (!detail::parse_double(toks[j + 1], v[j]) || !std::isfinite(v[j]))
                throw detail::parse_failure("bad component", line_no);
        table.vectors.insert_or_assign(std::string(toks[0]), std::move(v));
    }
    if (table.vectors.size() != count)
        throw detail::parse_failure("header announces " + std::to_string(count) + " vectors, found " +
                                        std::to_string(table.vectors.size()),
                                    line_no);
    return table;
}

// Embedding file: "kind L dim", "empty n id...", then L rows in sparse-row format.

inline void save_label_embeddings(const std::string& path, const label_embeddings& emb) {
    auto out = detail::open_out(path);
    out << to_string(emb.kind()) << ' ' << emb.size() << ' ' << emb.dim() << '\n';
    out << "empty " << emb.empty_labels().size();
    for (index_t l : emb.empty_labels()) out << ' ' << l;
    out << '\n';
    for (index_t l = 0; l < emb.size(); ++l) write_sparse_row(out, emb.row_sparse(l).view());
}

inline label_embeddings load_label_embeddings(const std::string& path) {
    auto in = detail::open_in(path);
    std::string line;
    std::size_t line_no = 1, L = 0, dim = 0, n_empty = 0;
    if (!std::getline(in, line)) throw detail::parse_failure("missing header", line_no);
    auto head = detail::split_ws(line);
    if (head.size() != 3 || !detail::parse_int(head[1], L) || !detail::parse_int(head[2], dim))
        throw detail::parse_failure("bad header, expected 'kind L dim'", line_no);
    auto kind = parse_embedding_kind(head[0]);
    ++line_no;
    if (!std::getline(in, line)) throw detail::parse_failure("missing empty-label line", line_no);
    auto et = detail::split_ws(line);
    if (et.size() < 2 || et[0] != "empty" || !detail::parse_int(et[1], n_empty) || et.size() != n_empty + 2)
        throw detail::parse_failure("bad empty-label line", line_no);
    std::vector<index_t> empty(n_empty);
    for (std::size_t i = 0; i < n_empty; ++i)
        if (!detail::parse_int(et[i + 2], empty[i])) throw detail::parse_failure("bad label id", line_no);
    sparse_matrix rows(dim);
    for (std::size_t l = 0; l < L; ++l) {
        if (!std::getline(in, line)) throw detail::parse_failure("truncated embedding file", line_no + 1);
        ++line_no;
        rows.append_row(parse_sparse_row(line, dim, line_no).view());
    }
    if (kind == embedding_kind::pifa) return label_embeddings(kind, std::move(rows), std::move(empty));
    std::vector<dense_vector> dense(L, dense_vector(dim, 0.0));
    for (std::size_t l = 0; l < L; ++l) {
        auto r = rows.row(l);
        for (std::size_t p = 0; p < r.nnz(); ++p) dense[l][r.indices[p]] = r.values[p];
    }
    return label_embeddings(kind, dim, std::move(dense), std::move(empty));
}

} // namespace xmc
