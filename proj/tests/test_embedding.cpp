// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>

#include "xmc/embedding.hpp"

using namespace xmc;
using Catch::Matchers::WithinAbs;

namespace {

sparse_vector sv(std::size_t dim, std::vector<std::pair<index_t, double>> e) {
    return sparse_vector::from_entries(dim, std::move(e));
}

sparse_matrix label_rows(std::size_t L, const std::vector<std::vector<index_t>>& pos) {
    sparse_matrix Y(L);
    for (const auto& p : pos) Y.append_row({p, std::vector<double>(p.size(), 1.0), L});
    return Y;
}

word_embedding_table table_2d() {
    word_embedding_table t;
    t.dim = 2;
    t.vectors["zoo"] = {1.0, 0.0};
    t.vectors["mexico"] = {0.0, 1.0};
    t.vectors["bacon"] = {3.0, 4.0};
    return t;
}

} // namespace

TEST_CASE("pifa_embed", "[embedding]") {
    // label 0: one instance; label 1: two orthogonal instances; label 2: none
    sparse_matrix X(3);
    X.append_row(sv(3, {{0, 0.6}, {1, 0.8}}));
    X.append_row(sv(3, {{0, 1.0}}));
    X.append_row(sv(3, {{1, 1.0}}));
    auto Y = label_rows(3, {{0}, {1}, {1}});
    auto emb = pifa_embed(Y, X);
    CHECK(emb.kind() == embedding_kind::pifa);
    REQUIRE(emb.size() == 3);
    CHECK(emb.sparse().row_copy(0) == X.row_copy(0));
    auto r1 = emb.sparse().row_copy(1);
    CHECK_THAT(r1.values()[0], WithinAbs(0.70711, 1e-5));
    CHECK_THAT(r1.values()[1], WithinAbs(0.70711, 1e-5));
    CHECK(emb.sparse().row(2).empty());
    CHECK(emb.empty_labels() == std::vector<index_t>{2});
    CHECK_THROWS_AS(pifa_embed(label_rows(3, {{0}}), X), error);
}

TEST_CASE("pifa_embed is independent of instance order", "[embedding][property]") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    std::uniform_int_distribution<index_t> lab(0, 5);
    const std::size_t N = 40, D = 20, L = 6;
    std::vector<sparse_vector> xs;
    std::vector<std::vector<index_t>> ys;
    for (std::size_t i = 0; i < N; ++i) {
        std::vector<std::pair<index_t, double>> e;
        for (index_t j = 0; j < D; ++j)
            if (u(rng) < 0.3) e.emplace_back(j, u(rng));
        e.emplace_back(static_cast<index_t>(i % D), 1.0);
        xs.push_back(l2_normalize(sv(D, e)));
        std::vector<index_t> y{lab(rng), lab(rng)};
        std::sort(y.begin(), y.end());
        y.erase(std::unique(y.begin(), y.end()), y.end());
        ys.push_back(y);
    }
    auto base = pifa_embed(label_rows(L, ys), sparse_matrix::from_rows(D, xs));
    std::vector<std::size_t> perm(N);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<sparse_vector> xs2;
    std::vector<std::vector<index_t>> ys2;
    for (auto p : perm) {
        xs2.push_back(xs[p]);
        ys2.push_back(ys[p]);
    }
    auto shuffled = pifa_embed(label_rows(L, ys2), sparse_matrix::from_rows(D, xs2));
    for (index_t l = 0; l < L; ++l) {
        auto a = base.sparse().row_copy(l), b = shuffled.sparse().row_copy(l);
        REQUIRE(a.indices() == b.indices());
        for (std::size_t p = 0; p < a.nnz(); ++p) CHECK_THAT(a.values()[p], WithinAbs(b.values()[p], 1e-12));
        if (!a.empty()) CHECK_THAT(squared_norm(a.view()), WithinAbs(1.0, 1e-9));
    }
}

TEST_CASE("text_embed", "[embedding]") {
    auto t = table_2d();
    auto emb = text_embed({"zoo mexico", "Zoo", "qqqq", "bacon"}, t);
    CHECK(emb.kind() == embedding_kind::text);
    CHECK_THAT(emb.dense_row(0)[0], WithinAbs(0.70711, 1e-5));
    CHECK_THAT(emb.dense_row(0)[1], WithinAbs(0.70711, 1e-5));
    CHECK(emb.dense_row(1)[0] == 1.0);
    CHECK(emb.dense_row(1)[1] == 0.0);
    CHECK(emb.dense_row(2)[0] == 0.0);
    CHECK(emb.empty_labels() == std::vector<index_t>{2});
    // one-word label equals its table row normalized
    CHECK_THAT(emb.dense_row(3)[0], WithinAbs(0.6, 1e-15));
    CHECK_THAT(emb.dense_row(3)[1], WithinAbs(0.8, 1e-15));
}

TEST_CASE("random_embed", "[embedding]") {
    auto a = random_embed(4, 2, 7), b = random_embed(4, 2, 7);
    for (index_t l = 0; l < 4; ++l) {
        CHECK(std::vector<double>(a.dense_row(l).begin(), a.dense_row(l).end()) ==
              std::vector<double>(b.dense_row(l).begin(), b.dense_row(l).end()));
        CHECK_THAT(squared_norm(a.dense_row(l)), WithinAbs(1.0, 1e-12));
    }
    CHECK(a.kind() == embedding_kind::random);
    CHECK(random_embed(0, 3, 1).size() == 0);
    CHECK_THROWS_AS(random_embed(3, 0, 1), error);
}

TEST_CASE("embedding files", "[embedding][io]") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "xmc_embedding_test";
    fs::create_directories(dir);

    {
        std::ofstream out(dir / "words.txt");
        out << "3 2\nzoo 1 0\nmexico 0 1\nbacon 3 4\n";
    }
    auto t = load_word_embeddings((dir / "words.txt").string());
    CHECK(t.dim == 2);
    CHECK(*t.find("bacon") == dense_vector{3.0, 4.0});
    {
        std::ofstream out(dir / "bad.txt");
        out << "1 2\nzoo 1\n";
    }
    CHECK_THROWS_AS(load_word_embeddings((dir / "bad.txt").string()), error);

    auto dense = text_embed({"zoo mexico", "qqqq"}, t);
    save_label_embeddings((dir / "dense.emb").string(), dense);
    auto back = load_label_embeddings((dir / "dense.emb").string());
    CHECK(back.kind() == embedding_kind::text);
    CHECK(back.empty_labels() == dense.empty_labels());
    CHECK(back.dense_row(0)[0] == dense.dense_row(0)[0]);

    sparse_matrix X(3);
    X.append_row(sv(3, {{0, 0.6}, {1, 0.8}}));
    auto pifa = pifa_embed(label_rows(2, {{1}}), X);
    save_label_embeddings((dir / "pifa.emb").string(), pifa);
    auto pback = load_label_embeddings((dir / "pifa.emb").string());
    CHECK(pback.sparse() == pifa.sparse());
    CHECK(pback.empty_labels() == std::vector<index_t>{0});
    fs::remove_all(dir);
}
