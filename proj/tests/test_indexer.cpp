// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <set>

#include "xmc/indexer.hpp"

using namespace xmc;

namespace {

label_embeddings dense_points(const std::vector<std::vector<double>>& pts, std::vector<index_t> empty = {}) {
    std::vector<dense_vector> rows;
    for (auto p : pts) {
        if (squared_norm(p) > 0) l2_normalize_inplace(p);
        rows.push_back(p);
    }
    return label_embeddings(embedding_kind::text, pts.front().size(), rows, std::move(empty));
}

std::vector<index_t> all_ids(std::size_t n) {
    std::vector<index_t> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    return ids;
}

std::set<std::set<index_t>> as_partition(const split_result& s) {
    return {std::set<index_t>(s.left.begin(), s.left.end()), std::set<index_t>(s.right.begin(), s.right.end())};
}

/// Best balanced bipartition by enumeration: maximizes the summed cosine of
/// members to their normalized centroid, i.e. the sum of the two resultant
/// vector lengths.
std::set<std::set<index_t>> brute_force_split(const std::vector<std::vector<double>>& pts) {
    const std::size_t n = pts.size(), half = (n + 1) / 2;
    double best = -1;
    std::set<std::set<index_t>> arg;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        if (static_cast<std::size_t>(std::popcount(mask)) != half) continue;
        std::vector<double> a(pts[0].size(), 0.0), b(pts[0].size(), 0.0);
        std::set<index_t> sa, sb;
        for (std::size_t i = 0; i < n; ++i) {
            auto& dst = (mask >> i) & 1 ? a : b;
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += pts[i][j];
            ((mask >> i) & 1 ? sa : sb).insert(static_cast<index_t>(i));
        }
        double score = std::sqrt(squared_norm(a)) + std::sqrt(squared_norm(b));
        if (score > best + 1e-12) {
            best = score;
            arg = {sa, sb};
        }
    }
    return arg;
}

std::vector<double> at_angle(double deg) {
    double r = deg * std::numbers::pi / 180.0;
    return {std::cos(r), std::sin(r)};
}

void check_partition(const cluster_assignment& a, std::size_t L) {
    REQUIRE(a.label_to_cluster.size() == L);
    REQUIRE(a.cluster_to_labels.size() == a.K);
    std::size_t total = 0;
    std::vector<int> seen(L, 0);
    for (std::size_t k = 0; k < a.K; ++k) {
        total += a.cluster_to_labels[k].size();
        for (index_t l : a.cluster_to_labels[k]) {
            ++seen[l];
            CHECK(a.label_to_cluster[l] == k);
        }
    }
    CHECK(total == L);
    CHECK(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
}

} // namespace

TEST_CASE("balanced_2means separates obvious pairs", "[indexer]") {
    auto emb = dense_points({{1, 0}, {0.99, 0.14}, {0, 1}, {0.14, 0.99}});
    auto s = balanced_2means(emb, all_ids(4), 1);
    CHECK(as_partition(s) == std::set<std::set<index_t>>{{0, 1}, {2, 3}});
}

TEST_CASE("balanced_2means matches enumeration on six angles", "[indexer]") {
    std::vector<std::vector<double>> pts;
    for (double deg : {0.0, 10.0, 20.0, 70.0, 80.0, 90.0}) pts.push_back(at_angle(deg));
    auto expected = brute_force_split(pts);
    REQUIRE(expected == std::set<std::set<index_t>>{{0, 1, 2}, {3, 4, 5}});
    for (std::uint64_t seed = 0; seed < 10; ++seed)
        CHECK(as_partition(balanced_2means(dense_points(pts), all_ids(6), seed)) == expected);
}

TEST_CASE("balanced_2means sizes and errors", "[indexer]") {
    auto emb = dense_points({{1, 0}, {0, 1}, {1, 1}});
    auto s = balanced_2means(emb, all_ids(3), 0);
    CHECK(s.left.size() == 2);
    CHECK(s.right.size() == 1);
    std::vector<index_t> one{0};
    try {
        balanced_2means(emb, one, 0);
        FAIL("expected TooSmall");
    } catch (const error& e) {
        CHECK(e.code() == errc::too_small);
    }
}

TEST_CASE("build_index", "[indexer]") {
    auto pairs = dense_points({{1, 0}, {0.99, 0.14}, {0, 1}, {0.14, 0.99}});
    auto one = build_index(pairs, 1, 0);
    CHECK(one.K == 1);
    CHECK(one.cluster_to_labels[0] == std::vector<index_t>{0, 1, 2, 3});

    auto two = build_index(pairs, 2, 0);
    check_partition(two, 4);
    CHECK(two.label_to_cluster[0] == two.label_to_cluster[1]);
    CHECK(two.label_to_cluster[2] == two.label_to_cluster[3]);
    CHECK(two.label_to_cluster[0] != two.label_to_cluster[2]);

    auto check_code = [&](std::size_t K, errc code) {
        try {
            build_index(pairs, K, 0);
            FAIL("expected an error");
        } catch (const error& e) {
            CHECK(e.code() == code);
        }
    };
    check_code(3, errc::bad_k);
    check_code(8, errc::bad_k);
    check_code(0, errc::bad_k);
}

TEST_CASE("build_index places empty labels in the smallest clusters", "[indexer]") {
    auto emb = dense_points({{1, 0}, {0, 0}, {0.99, 0.14}, {0, 1}, {0.14, 0.99}, {0, 0}, {0.7, 0.7}}, {1, 5});
    auto a = build_index(emb, 2, 3);
    check_partition(a, 7);
    CHECK(a.cluster_to_labels[0].size() + a.cluster_to_labels[1].size() == 7);
    auto diff = static_cast<long>(a.cluster_to_labels[0].size()) - static_cast<long>(a.cluster_to_labels[1].size());
    CHECK(std::abs(diff) <= 1);
}

TEST_CASE("build_index at Eurlex scale is balanced", "[indexer]") {
    // 3714 labels into 64 clusters gives sizes of 58 or 59.
    auto emb = random_embed(3714, 16, 5);
    auto a = build_index(emb, 64, 11);
    check_partition(a, 3714);
    for (const auto& c : a.cluster_to_labels) {
        CHECK(c.size() >= 58);
        CHECK(c.size() <= 58 + 6);
    }
}

TEST_CASE("build_index invariants on random sets", "[indexer][property]") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 30; ++trial) {
        std::size_t L = 8 + rng() % 120, dim = 2 + rng() % 10;
        std::size_t K = std::size_t{1} << (rng() % 4);
        auto emb = random_embed(L, dim, rng());
        std::uint64_t seed = rng();
        auto a = build_index(emb, K, seed);
        check_partition(a, L);
        std::size_t lo = L, hi = 0;
        for (const auto& c : a.cluster_to_labels) {
            lo = std::min(lo, c.size());
            hi = std::max(hi, c.size());
        }
        CHECK(hi - lo <= log2_exact(K));
        CHECK(build_index(emb, K, seed) == a);
    }
}

TEST_CASE("cluster_stats", "[indexer]") {
    auto a = cluster_assignment::from_label_map(2, {0, 0, 1, 1}, 0, embedding_kind::pifa);
    auto identity = [] {
        sparse_matrix Y(4);
        for (index_t i = 0; i < 4; ++i) Y.append_row(sparse_vector(4, {i}, {1.0}));
        return Y;
    }();
    CHECK(cluster_stats(a, identity) == std::vector<std::size_t>{2, 2});
    CHECK(cluster_stats(a, sparse_matrix(4)) == std::vector<std::size_t>{0, 0});

    sparse_matrix Y(4);
    Y.append_row(sparse_vector(4, {0, 2}, {1.0, 1.0}));
    Y.append_row(sparse_vector(4, {1, 3}, {1.0, 1.0}));
    CHECK(cluster_stats(a, Y) == std::vector<std::size_t>{2, 2});
}

TEST_CASE("cluster counts dominate member label frequencies", "[indexer][property]") {
    std::mt19937_64 rng(8);
    const std::size_t L = 40, N = 300;
    sparse_matrix Y(L);
    std::vector<std::size_t> freq(L, 0);
    for (std::size_t i = 0; i < N; ++i) {
        std::set<index_t> s;
        for (int j = 0; j < 3; ++j) s.insert(static_cast<index_t>(rng() % L));
        std::vector<index_t> v(s.begin(), s.end());
        for (auto l : v) ++freq[l];
        Y.append_row({v, std::vector<double>(v.size(), 1.0), L});
    }
    auto a = build_index(random_embed(L, 4, 1), 8, 2);
    auto counts = cluster_stats(a, Y);
    for (std::size_t k = 0; k < a.K; ++k)
        for (index_t l : a.cluster_to_labels[k]) CHECK(counts[k] >= freq[l]);
}

TEST_CASE("cluster file round-trip", "[indexer][io]") {
    auto a = build_index(random_embed(20, 3, 1), 4, 99);
    auto path = (std::filesystem::temp_directory_path() / "xmc_clusters_test.txt").string();
    save_cluster_assignment(path, a);
    CHECK(load_cluster_assignment(path) == a);
    std::filesystem::remove(path);
}
