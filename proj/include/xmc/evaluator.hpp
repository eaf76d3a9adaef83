// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "xmc/matcher.hpp"
#include "xmc/sparse.hpp"

namespace xmc {

namespace detail {

inline bool contains_sorted(std::span<const index_t> truth, index_t id) {
    return std::binary_search(truth.begin(), truth.end(), id);
}

inline std::size_t hits_at(std::span<const index_t> ranked, std::span<const index_t> truth, std::size_t k) {
    std::size_t hits = 0, n = std::min(k, ranked.size());
    for (std::size_t i = 0; i < n; ++i) hits += contains_sorted(truth, ranked[i]);
    return hits;
}

inline std::vector<index_t> sorted_copy(std::span<const index_t> v) {
    std::vector<index_t> s(v.begin(), v.end());
    std::sort(s.begin(), s.end());
    return s;
}

} // namespace detail

/// Hits in the top k over k; missing slots count as misses.
inline double precision_at_k(std::span<const index_t> ranked, std::span<const index_t> truth, std::size_t k) {
    if (k == 0) throw error(errc::bad_input, "k must be at least 1");
    auto t = detail::sorted_copy(truth);
    return static_cast<double>(detail::hits_at(ranked, t, k)) / static_cast<double>(k);
}

/// Hits in the top k over |truth|; 0 for an empty truth set.
inline double recall_at_k(std::span<const index_t> ranked, std::span<const index_t> truth, std::size_t k) {
    if (k == 0) throw error(errc::bad_input, "k must be at least 1");
    if (truth.empty()) return 0.0;
    auto t = detail::sorted_copy(truth);
    return static_cast<double>(detail::hits_at(ranked, t, k)) / static_cast<double>(t.size());
}

struct metric_report {
    std::vector<std::size_t> ks;
    std::vector<double> precision;
    std::vector<double> recall;
    std::size_t instance_count = 0;
    /// Instances with at least one positive; the recall denominator.
    std::size_t recall_count = 0;

    double p_at(std::size_t k) const { return precision.at(index_of(k)); }
    double r_at(std::size_t k) const { return recall.at(index_of(k)); }

  private:
    std::size_t index_of(std::size_t k) const {
        auto it = std::find(ks.begin(), ks.end(), k);
        if (it == ks.end()) throw error(errc::bad_input, "k=" + std::to_string(k) + " not in report");
        return static_cast<std::size_t>(it - ks.begin());
    }
};

/// Means over the rows of Y_test. Rows without a prediction list count as
/// empty rankings; empty-truth rows enter precision only.
inline metric_report evaluate(const std::vector<ranked_list>& preds, const sparse_matrix& Y_test,
                              std::vector<std::size_t> ks = {1, 3, 5}) {
    for (std::size_t k : ks)
        if (k == 0) throw error(errc::bad_input, "k must be at least 1");
    metric_report r;
    r.ks = std::move(ks);
    r.precision.assign(r.ks.size(), 0.0);
    r.recall.assign(r.ks.size(), 0.0);
    r.instance_count = Y_test.rows();
    std::vector<index_t> ranked;
    for (std::size_t i = 0; i < Y_test.rows(); ++i) {
        ranked.clear();
        if (i < preds.size())
            for (const auto& e : preds[i]) ranked.push_back(e.id);
        auto truth = Y_test.row(i).indices;
        for (std::size_t j = 0; j < r.ks.size(); ++j) {
            r.precision[j] += precision_at_k(ranked, truth, r.ks[j]);
            if (!truth.empty()) r.recall[j] += recall_at_k(ranked, truth, r.ks[j]);
        }
        if (!truth.empty()) ++r.recall_count;
    }
    for (std::size_t j = 0; j < r.ks.size(); ++j) {
        if (r.instance_count) r.precision[j] /= static_cast<double>(r.instance_count);
        if (r.recall_count) r.recall[j] /= static_cast<double>(r.recall_count);
    }
    return r;
}

inline void write_report_text(std::ostream& out, const metric_report& r) {
    char buf[96];
    out << "instances  " << r.instance_count << "  (with positives: " << r.recall_count << ")\n";
    std::snprintf(buf, sizeof(buf), "%-6s %10s %10s\n", "k", "P@k", "R@k");
    out << buf;
    for (std::size_t j = 0; j < r.ks.size(); ++j) {
        std::snprintf(buf, sizeof(buf), "%-6zu %10.4f %10.4f\n", r.ks[j], r.precision[j], r.recall[j]);
        out << buf;
    }
}

/// One "key=value" per line: p@k, r@k, instances, recall_instances.
inline void write_report_kv(std::ostream& out, const metric_report& r) {
    for (std::size_t j = 0; j < r.ks.size(); ++j) out << "p@" << r.ks[j] << '=' << detail::format_fixed(r.precision[j], 6) << '\n';
    for (std::size_t j = 0; j < r.ks.size(); ++j) out << "r@" << r.ks[j] << '=' << detail::format_fixed(r.recall[j], 6) << '\n';
    out << "instances=" << r.instance_count << '\n';
    out << "recall_instances=" << r.recall_count << '\n';
}

} // namespace xmc
