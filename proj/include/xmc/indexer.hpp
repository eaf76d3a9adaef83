// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "xmc/detail/hash.hpp"
#include "xmc/detail/parallel.hpp"
#include "xmc/embedding.hpp"
#include "xmc/sparse.hpp"

namespace xmc {

/// Partition of the label ids [0, L) into K clusters.
struct cluster_assignment {
    std::size_t K = 0;
    std::vector<index_t> label_to_cluster;
    std::vector<std::vector<index_t>> cluster_to_labels;
    std::uint64_t seed = 0;
    embedding_kind kind = embedding_kind::pifa;

    std::size_t num_labels() const noexcept { return label_to_cluster.size(); }

    /// Builds both views from the label->cluster map; members sorted by id.
    static cluster_assignment from_label_map(std::size_t K, std::vector<index_t> label_to_cluster,
                                             std::uint64_t seed, embedding_kind kind) {
        cluster_assignment a;
        a.K = K;
        a.seed = seed;
        a.kind = kind;
        a.cluster_to_labels.assign(K, {});
        for (std::size_t l = 0; l < label_to_cluster.size(); ++l) {
            if (label_to_cluster[l] >= K)
                throw error(errc::bad_input, "label " + std::to_string(l) + " assigned to cluster " +
                                                 std::to_string(label_to_cluster[l]) + " >= K");
            a.cluster_to_labels[label_to_cluster[l]].push_back(static_cast<index_t>(l));
        }
        a.label_to_cluster = std::move(label_to_cluster);
        return a;
    }

    friend bool operator==(const cluster_assignment&, const cluster_assignment&) = default;
};

inline bool is_power_of_two(std::size_t k) noexcept { return k != 0 && (k & (k - 1)) == 0; }

inline std::size_t round_up_power_of_two(std::size_t k) noexcept {
    std::size_t p = 1;
    while (p < k) p <<= 1;
    return p;
}

inline std::size_t log2_exact(std::size_t k) noexcept {
    std::size_t d = 0;
    while ((std::size_t{1} << d) < k) ++d;
    return d;
}

struct split_result {
    std::vector<index_t> left, right;
};

inline constexpr std::size_t default_kmeans_iters = 50;
inline constexpr std::size_t init_sample_size = 32;

/// Splits `points` (label ids into `emb`) into two halves whose sizes differ
/// by at most one. Centroids start at the least-similar pair from a seeded
/// sample; each round ranks points by their similarity margin between the
/// two centroids, hands the top ceil(n/2) to the left, and re-centres both
/// halves. Stops at the first repeated assignment or after `max_iters`.
inline split_result balanced_2means(const label_embeddings& emb, std::span<const index_t> points,
                                    std::uint64_t seed, std::size_t max_iters = default_kmeans_iters) {
    const std::size_t n = points.size();
    if (n < 2) throw error(errc::too_small, "balanced 2-means needs at least 2 points, got " + std::to_string(n));
    const std::size_t dim = emb.dim();

    std::vector<std::size_t> pos(n);
    std::iota(pos.begin(), pos.end(), 0);
    std::mt19937_64 rng(seed);
    const std::size_t m = std::min(init_sample_size, n);
    for (std::size_t i = 0; i < m; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(pos[i], pos[pick(rng)]);
    }
    std::vector<index_t> sample(m);
    for (std::size_t i = 0; i < m; ++i) sample[i] = points[pos[i]];
    std::sort(sample.begin(), sample.end());
    index_t seed_a = sample[0], seed_b = sample[1];
    double best = emb.dot(seed_a, seed_b);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            double s = emb.dot(sample[i], sample[j]);
            if (s < best) {
                best = s;
                seed_a = sample[i];
                seed_b = sample[j];
            }
        }
    }

    dense_vector c_left(dim, 0.0), c_right(dim, 0.0);
    emb.add_to(seed_a, c_left);
    emb.add_to(seed_b, c_right);

    const std::size_t n_left = (n + 1) / 2;
    std::vector<char> in_left(n, 0), prev(n, 2);
    std::vector<double> margin(n);
    std::vector<std::size_t> order(n);
    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        for (std::size_t i = 0; i < n; ++i) margin[i] = emb.dot(points[i], c_left) - emb.dot(points[i], c_right);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (margin[a] != margin[b]) return margin[a] > margin[b];
            return points[a] < points[b];
        });
        std::fill(in_left.begin(), in_left.end(), 0);
        for (std::size_t r = 0; r < n_left; ++r) in_left[order[r]] = 1;
        if (in_left == prev) break;
        prev = in_left;

        dense_vector next_left(dim, 0.0), next_right(dim, 0.0);
        for (std::size_t i = 0; i < n; ++i) emb.add_to(points[i], in_left[i] ? next_left : next_right);
        // A half whose members cancel out keeps its previous centroid.
        if (squared_norm(next_left) > 0.0) {
            l2_normalize_inplace(next_left);
            c_left = std::move(next_left);
        }
        if (squared_norm(next_right) > 0.0) {
            l2_normalize_inplace(next_right);
            c_right = std::move(next_right);
        }
    }

    split_result out;
    for (std::size_t i = 0; i < n; ++i) (in_left[i] ? out.left : out.right).push_back(points[i]);
    std::sort(out.left.begin(), out.left.end());
    std::sort(out.right.begin(), out.right.end());
    return out;
}

/// Recursive balanced 2-means to depth log2(K). Labels with empty
/// embeddings are placed afterwards, each into the currently smallest
/// cluster (smaller cluster id on ties).
inline cluster_assignment build_index(const label_embeddings& emb, std::size_t K, std::uint64_t seed,
                                      std::size_t max_iters = default_kmeans_iters) {
    const std::size_t L = emb.size();
    if (!is_power_of_two(K)) throw error(errc::bad_k, "K=" + std::to_string(K) + " is not a power of two");
    if (K > L) throw error(errc::bad_k, "K=" + std::to_string(K) + " exceeds the label count " + std::to_string(L));

    std::vector<std::vector<index_t>> level(1);
    for (index_t l = 0; l < L; ++l)
        if (!emb.is_empty(l)) level[0].push_back(l);

    const std::size_t depth = log2_exact(K);
    for (std::size_t d = 0; d < depth; ++d) {
        std::vector<std::vector<index_t>> next(level.size() * 2);
        detail::parallel_for(level.size(), [&](std::size_t node) {
            const auto& members = level[node];
            if (members.size() < 2) {
                next[2 * node] = members;
                return;
            }
            std::uint64_t node_seed = detail::derive_seed(seed, (std::uint64_t{1} << d) + node);
            auto split = balanced_2means(emb, members, node_seed, max_iters);
            next[2 * node] = std::move(split.left);
            next[2 * node + 1] = std::move(split.right);
        });
        level = std::move(next);
    }

    std::vector<index_t> label_to_cluster(L, 0);
    std::vector<std::size_t> sizes(K, 0);
    for (std::size_t k = 0; k < K; ++k) {
        for (index_t l : level[k]) label_to_cluster[l] = static_cast<index_t>(k);
        sizes[k] = level[k].size();
    }
    for (index_t l : emb.empty_labels()) {
        auto smallest = static_cast<std::size_t>(std::min_element(sizes.begin(), sizes.end()) - sizes.begin());
        label_to_cluster[l] = static_cast<index_t>(smallest);
        ++sizes[smallest];
    }
    return cluster_assignment::from_label_map(K, std::move(label_to_cluster), seed, emb.kind());
}

/// Per cluster, the number of instances with at least one positive label in it.
inline std::vector<std::size_t> cluster_stats(const cluster_assignment& assign, const sparse_matrix& Y) {
    if (Y.cols() != assign.num_labels())
        throw error(errc::dimension_mismatch, "label matrix has " + std::to_string(Y.cols()) +
                                                  " columns, assignment covers " +
                                                  std::to_string(assign.num_labels()) + " labels");
    std::vector<std::size_t> counts(assign.K, 0);
    std::vector<std::size_t> last_seen(assign.K, static_cast<std::size_t>(-1));
    for (std::size_t i = 0; i < Y.rows(); ++i) {
        for (index_t l : Y.row(i).indices) {
            index_t k = assign.label_to_cluster[l];
            if (last_seen[k] != i) {
                last_seen[k] = i;
                ++counts[k];
            }
        }
    }
    return counts;
}

// Cluster file: "L K seed kind", then "label_id cluster_id" per label.

inline void write_cluster_assignment(std::ostream& out, const cluster_assignment& a) {
    out << a.num_labels() << ' ' << a.K << ' ' << a.seed << ' ' << to_string(a.kind) << '\n';
    for (std::size_t l = 0; l < a.num_labels(); ++l) out << l << ' ' << a.label_to_cluster[l] << '\n';
}

inline void save_cluster_assignment(const std::string& path, const cluster_assignment& a) {
    auto out = detail::open_out(path);
    write_cluster_assignment(out, a);
}

inline cluster_assignment load_cluster_assignment(const std::string& path) {
    auto in = detail::open_in(path);
    std::string line;
    std::size_t line_no = 1, L = 0, K = 0;
    std::uint64_t seed = 0;
    if (!std::getline(in, line)) throw detail::parse_failure("missing header", line_no);
    auto head = detail::split_ws(line);
    if (head.size() != 4 || !detail::parse_int(head[0], L) || !detail::parse_int(head[1], K) ||
        !detail::parse_int(head[2], seed))
        throw detail::parse_failure("bad header, expected 'L K seed kind'", line_no);
    auto kind = parse_embedding_kind(head[3]);
    std::vector<index_t> map(L, 0);
    std::vector<char> seen(L, 0);
    for (std::size_t n = 0; n < L; ++n) {
        if (!std::getline(in, line)) throw detail::parse_failure("truncated cluster file", line_no + 1);
        ++line_no;
        auto toks = detail::split_ws(line);
        std::size_t l = 0, k = 0;
        if (toks.size() != 2 || !detail::parse_int(toks[0], l) || !detail::parse_int(toks[1], k) || l >= L || k >= K ||
            seen[l])
            throw detail::parse_failure("bad cluster line", line_no);
        seen[l] = 1;
        map[l] = static_cast<index_t>(k);
    }
    return cluster_assignment::from_label_map(K, std::move(map), seed, kind);
}

} // namespace xmc
