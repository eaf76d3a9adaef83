// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "xmc/detail/text_io.hpp"
#include "xmc/error.hpp"

namespace xmc {

using index_t = std::uint32_t;
using dense_vector = std::vector<double>;

/// (id, value) pair as produced by top-k extraction and ranked outputs.
struct scored_id {
    index_t id = 0;
    double score = 0.0;
    friend bool operator==(const scored_id&, const scored_id&) = default;
};

/// Descending by score; smaller id wins ties.
inline bool ranks_before(const scored_id& a, const scored_id& b) noexcept {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
}

/// Non-owning view over one sparse row.
struct sparse_view {
    std::span<const index_t> indices;
    std::span<const double> values;
    std::size_t dim = 0;

    std::size_t nnz() const noexcept { return indices.size(); }
    bool empty() const noexcept { return indices.empty(); }
};

namespace detail {

inline void check_sparse(std::span<const index_t> idx, std::span<const double> val, std::size_t dim) {
    if (idx.size() != val.size())
        throw error(errc::bad_input, "index/value length mismatch");
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= dim)
            throw error(errc::dimension_mismatch,
                        "index " + std::to_string(idx[i]) + " out of range for dim " + std::to_string(dim));
        if (i > 0 && idx[i] <= idx[i - 1])
            throw error(errc::bad_input, "indices must be strictly increasing");
        if (!std::isfinite(val[i])) throw error(errc::bad_input, "non-finite value");
        if (val[i] == 0.0) throw error(errc::bad_input, "explicit zero stored");
    }
}

} // namespace detail

class sparse_vector {
  public:
    sparse_vector() = default;
    explicit sparse_vector(std::size_t dim) : dim_(dim) {}

    sparse_vector(std::size_t dim, std::vector<index_t> indices, std::vector<double> values)
        : dim_(dim), indices_(std::move(indices)), values_(std::move(values)) {
        detail::check_sparse(indices_, values_, dim_);
    }

    /// Builds from unordered entries: sorts, sums duplicates, drops zeros.
    static sparse_vector from_entries(std::size_t dim, std::vector<std::pair<index_t, double>> entries) {
        std::stable_sort(entries.begin(), entries.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        std::vector<index_t> idx;
        std::vector<double> val;
        for (std::size_t i = 0; i < entries.size();) {
            index_t id = entries[i].first;
            double sum = 0.0;
            for (; i < entries.size() && entries[i].first == id; ++i) sum += entries[i].second;
            if (sum != 0.0) {
                idx.push_back(id);
                val.push_back(sum);
            }
        }
        return sparse_vector(dim, std::move(idx), std::move(val));
    }

    /// Copies the nonzeros of a dense vector.
    static sparse_vector from_dense(std::span<const double> dense) {
        std::vector<index_t> idx;
        std::vector<double> val;
        for (std::size_t j = 0; j < dense.size(); ++j) {
            if (dense[j] != 0.0) {
                idx.push_back(static_cast<index_t>(j));
                val.push_back(dense[j]);
            }
        }
        return sparse_vector(dense.size(), std::move(idx), std::move(val));
    }

    std::size_t dim() const noexcept { return dim_; }
    std::size_t nnz() const noexcept { return indices_.size(); }
    bool empty() const noexcept { return indices_.empty(); }
    const std::vector<index_t>& indices() const noexcept { return indices_; }
    const std::vector<double>& values() const noexcept { return values_; }

    sparse_view view() const noexcept { return {indices_, values_, dim_}; }
    operator sparse_view() const noexcept { return view(); }

    friend bool operator==(const sparse_vector&, const sparse_vector&) = default;

  private:
    std::size_t dim_ = 0;
    std::vector<index_t> indices_;
    std::vector<double> values_;
};

/// Row-compressed sparse matrix. Rows are appended once and never mutated.
class sparse_matrix {
  public:
    sparse_matrix() = default;
    explicit sparse_matrix(std::size_t cols) : cols_(cols) {}

    static sparse_matrix from_rows(std::size_t cols, const std::vector<sparse_vector>& rows) {
        sparse_matrix m(cols);
        for (const auto& r : rows) m.append_row(r.view());
        return m;
    }

    void append_row(sparse_view row) {
        if (row.dim != cols_)
            throw error(errc::dimension_mismatch,
                        "row dim " + std::to_string(row.dim) + " != cols " + std::to_string(cols_));
        detail::check_sparse(row.indices, row.values, cols_);
        indices_.insert(indices_.end(), row.indices.begin(), row.indices.end());
        values_.insert(values_.end(), row.values.begin(), row.values.end());
        indptr_.push_back(indices_.size());
    }

    void append_empty_row() { indptr_.push_back(indices_.size()); }

    std::size_t rows() const noexcept { return indptr_.size() - 1; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t nnz() const noexcept { return indices_.size(); }

    sparse_view row(std::size_t i) const noexcept {
        std::size_t b = indptr_[i], e = indptr_[i + 1];
        return {std::span<const index_t>(indices_).subspan(b, e - b),
                std::span<const double>(values_).subspan(b, e - b), cols_};
    }

    sparse_vector row_copy(std::size_t i) const {
        auto r = row(i);
        return sparse_vector(cols_, {r.indices.begin(), r.indices.end()}, {r.values.begin(), r.values.end()});
    }

    sparse_matrix transpose() const {
        std::vector<std::size_t> counts(cols_ + 1, 0);
        for (index_t c : indices_) ++counts[c + 1];
        for (std::size_t c = 0; c < cols_; ++c) counts[c + 1] += counts[c];
        sparse_matrix t(rows());
        t.indptr_ = counts;
        t.indices_.resize(nnz());
        t.values_.resize(nnz());
        std::vector<std::size_t> next(counts.begin(), counts.end() - 1);
        for (std::size_t r = 0; r < rows(); ++r) {
            for (std::size_t p = indptr_[r]; p < indptr_[r + 1]; ++p) {
                std::size_t dst = next[indices_[p]]++;
                t.indices_[dst] = static_cast<index_t>(r);
                t.values_[dst] = values_[p];
            }
        }
        return t;
    }

    friend bool operator==(const sparse_matrix&, const sparse_matrix&) = default;

  private:
    std::size_t cols_ = 0;
    std::vector<std::size_t> indptr_{0};
    std::vector<index_t> indices_;
    std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

/// Merge-join over sorted indices; accumulation runs in increasing index order.
inline double dot(sparse_view a, sparse_view b) {
    if (a.dim != b.dim)
        throw error(errc::dimension_mismatch,
                    "dot of dims " + std::to_string(a.dim) + " and " + std::to_string(b.dim));
    double sum = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.nnz() && j < b.nnz()) {
        if (a.indices[i] < b.indices[j]) ++i;
        else if (a.indices[i] > b.indices[j]) ++j;
        else sum += a.values[i++] * b.values[j++];
    }
    return sum;
}

inline double dot(sparse_view a, std::span<const double> dense) {
    if (a.dim != dense.size())
        throw error(errc::dimension_mismatch,
                    "dot of dims " + std::to_string(a.dim) + " and " + std::to_string(dense.size()));
    double sum = 0.0;
    for (std::size_t i = 0; i < a.nnz(); ++i) sum += a.values[i] * dense[a.indices[i]];
    return sum;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw error(errc::dimension_mismatch,
                    "dot of dims " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
    return sum;
}

inline double squared_norm(sparse_view v) noexcept {
    double s = 0.0;
    for (double x : v.values) s += x * x;
    return s;
}

inline double squared_norm(std::span<const double> v) noexcept {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

/// dense += alpha * v
inline void axpy(double alpha, sparse_view v, std::span<double> dense) {
    for (std::size_t i = 0; i < v.nnz(); ++i) dense[v.indices[i]] += alpha * v.values[i];
}

inline sparse_vector scale(sparse_view v, double alpha) {
    std::vector<std::pair<index_t, double>> e;
    e.reserve(v.nnz());
    for (std::size_t i = 0; i < v.nnz(); ++i) e.emplace_back(v.indices[i], alpha * v.values[i]);
    return sparse_vector::from_entries(v.dim, std::move(e));
}

inline sparse_vector l2_normalize(sparse_view v) {
    double norm = std::sqrt(squared_norm(v));
    if (norm == 0.0) throw error(errc::empty_vector, "cannot normalize an all-zero vector");
    std::vector<index_t> idx(v.indices.begin(), v.indices.end());
    std::vector<double> val(v.nnz());
    for (std::size_t i = 0; i < v.nnz(); ++i) val[i] = v.values[i] / norm;
    return sparse_vector(v.dim, std::move(idx), std::move(val));
}

inline void l2_normalize_inplace(std::span<double> v) {
    double norm = std::sqrt(squared_norm(v));
    if (norm == 0.0) throw error(errc::empty_vector, "cannot normalize an all-zero vector");
    for (double& x : v) x /= norm;
}

/// The min(k, list.size()) best entries, descending with smaller-id tie-break.
inline std::vector<scored_id> top_k(std::vector<scored_id> list, std::size_t k) {
    std::size_t n = std::min(k, list.size());
    std::partial_sort(list.begin(), list.begin() + static_cast<std::ptrdiff_t>(n), list.end(), ranks_before);
    list.resize(n);
    return list;
}

inline std::vector<scored_id> top_k(sparse_view row, std::size_t k) {
    std::vector<scored_id> list(row.nnz());
    for (std::size_t i = 0; i < row.nnz(); ++i) list[i] = {row.indices[i], row.values[i]};
    return top_k(std::move(list), k);
}

inline std::vector<std::vector<scored_id>> spmm_top(const sparse_matrix& scores, std::size_t k) {
    if (k == 0) throw error(errc::bad_input, "k must be at least 1");
    std::vector<std::vector<scored_id>> out(scores.rows());
    for (std::size_t r = 0; r < scores.rows(); ++r) out[r] = top_k(scores.row(r), k);
    return out;
}

// ---------------------------------------------------------------------------
// Text format: "rows cols" header, then "nnz idx:val ..." per row.
// ---------------------------------------------------------------------------

inline void write_sparse_row(std::ostream& out, sparse_view row) {
    out << row.nnz();
    for (std::size_t i = 0; i < row.nnz(); ++i)
        out << ' ' << row.indices[i] << ':' << detail::format_exact(row.values[i]);
    out << '\n';
}

inline void write_sparse_matrix(std::ostream& out, const sparse_matrix& m) {
    out << m.rows() << ' ' << m.cols() << '\n';
    for (std::size_t r = 0; r < m.rows(); ++r) write_sparse_row(out, m.row(r));
}

inline sparse_vector parse_sparse_row(std::string_view line, std::size_t cols, std::size_t line_no) {
    auto toks = detail::split_ws(line);
    std::size_t nnz = 0;
    if (toks.empty() || !detail::parse_int(toks[0], nnz) || toks.size() != nnz + 1)
        throw detail::parse_failure("bad sparse row", line_no);
    std::vector<index_t> idx(nnz);
    std::vector<double> val(nnz);
    for (std::size_t i = 0; i < nnz; ++i) {
        std::string_view k, v;
        if (!detail::split_pair(toks[i + 1], k, v) || !detail::parse_int(k, idx[i]) ||
            !detail::parse_double(v, val[i]))
            throw detail::parse_failure("bad entry '" + std::string(toks[i + 1]) + "'", line_no);
    }
    try {
        return sparse_vector(cols, std::move(idx), std::move(val));
    } catch (const error& e) {
        throw detail::parse_failure(e.what(), line_no);
    }
}

/// Reads one matrix block; `line_no` tracks position for error messages.
inline sparse_matrix read_sparse_matrix(std::istream& in, std::size_t& line_no) {
    std::string line;
    std::size_t rows = 0, cols = 0;
    if (!std::getline(in, line)) throw detail::parse_failure("missing matrix header", line_no + 1);
    ++line_no;
    auto head = detail::split_ws(line);
    if (head.size() != 2 || !detail::parse_int(head[0], rows) || !detail::parse_int(head[1], cols))
        throw detail::parse_failure("bad matrix header", line_no);
    sparse_matrix m(cols);
    for (std::size_t r = 0; r < rows; ++r) {
        if (!std::getline(in, line)) throw detail::parse_failure("truncated matrix", line_no + 1);
        ++line_no;
        m.append_row(parse_sparse_row(line, cols, line_no).view());
    }
    return m;
}

inline sparse_matrix read_sparse_matrix(std::istream& in) {
    std::size_t line_no = 0;
    return read_sparse_matrix(in, line_no);
}

inline void save_sparse_matrix(const std::string& path, const sparse_matrix& m) {
    auto out = detail::open_out(path);
    write_sparse_matrix(out, m);
}

inline sparse_matrix load_sparse_matrix(const std::string& path) {
    auto in = detail::open_in(path);
    return read_sparse_matrix(in);
}

} // namespace xmc
