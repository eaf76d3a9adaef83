// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include <random>

#include "support/oracles.hpp"
#include "xmc/linear.hpp"

using namespace xmc;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

sparse_matrix from_dense(const oracle::dense_rows& X) {
    sparse_matrix m(X.front().size());
    for (const auto& r : X) m.append_row(sparse_vector::from_dense(r).view());
    return m;
}

std::vector<double> theta_of(const linear_model& m, std::size_t d, double bias) {
    std::vector<double> t(d, 0.0);
    for (std::size_t p = 0; p < m.weights.nnz(); ++p) t[m.weights.indices()[p]] = m.weights.values()[p];
    if (bias != 0.0) t.push_back(m.bias / bias);
    return t;
}

struct problem {
    oracle::dense_rows X;
    std::vector<int> y;
};

problem random_problem(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> n_pts(2, 20), n_dim(1, 5);
    std::normal_distribution<double> g(0.0, 1.0);
    std::bernoulli_distribution coin(0.5), zero(0.2);
    problem p;
    int n = n_pts(rng), d = n_dim(rng);
    for (int i = 0; i < n; ++i) {
        std::vector<double> x(d);
        for (double& v : x) v = zero(rng) ? 0.0 : g(rng);
        p.X.push_back(x);
        p.y.push_back(coin(rng) ? 1 : -1);
    }
    return p;
}

} // namespace

TEST_CASE("1-D problems match their closed forms", "[solver]") {
    solver_options o;
    o.bias = 0.0;
    o.tol = 1e-10;
    // 0.5 w^2 + 2 (1 - w)^2 is stationary at w = 0.8
    {
        oracle::dense_rows X{{1.0}, {-1.0}};
        std::vector<int> y{1, -1};
        auto r = train_ova_squared_hinge(from_dense(X), y, o);
        CHECK(r.converged);
        CHECK_THAT(r.model.weights.values()[0], WithinAbs(0.8, 1e-9));
        auto f = [&](double w) { return oracle::objective(X, y, {w}, 1.0, 0.0); };
        CHECK_THAT((f(0.8 + 1e-6) - f(0.8 - 1e-6)) / 2e-6, WithinAbs(0.0, 1e-6));
    }
    // 0.5 w^2 + (1 - w)^2 is stationary at w = 2/3
    {
        oracle::dense_rows X{{1.0}};
        std::vector<int> y{1};
        auto r = train_ova_squared_hinge(from_dense(X), y, o);
        CHECK_THAT(r.model.weights.values()[0], WithinAbs(2.0 / 3.0, 1e-9));
    }
}

TEST_CASE("separable toy set beats the zero vector", "[solver]") {
    oracle::dense_rows X{{2, 1}, {1.5, 2}, {-1, -2}, {-2, -0.5}};
    std::vector<int> y{1, 1, -1, -1};
    auto r = train_ova_squared_hinge(from_dense(X), y);
    auto theta = theta_of(r.model, 2, 1.0);
    CHECK(oracle::objective(X, y, theta, 1.0, 1.0) <= 1.0 * X.size());
    for (std::size_t i = 0; i < X.size(); ++i) {
        double m = theta[0] * X[i][0] + theta[1] * X[i][1] + r.model.bias;
        CHECK(m * y[i] > 0);
    }
}

TEST_CASE("solver reaches the reference minimum", "[solver][property]") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 30; ++trial) {
        auto p = random_problem(rng);
        const std::size_t d = p.X.front().size();
        double C = trial % 3 == 0 ? 0.5 : 1.0;
        solver_options o;
        o.C = C;
        o.seed = static_cast<std::uint64_t>(trial);
        auto r = train_ova_squared_hinge(from_dense(p.X), p.y, o);
        auto theta = theta_of(r.model, d, 1.0);
        auto ref = oracle::minimize(p.X, p.y, C, 1.0);
        double f = oracle::objective(p.X, p.y, theta, C, 1.0);
        double f_ref = oracle::objective(p.X, p.y, ref, C, 1.0);
        CHECK_THAT(f, WithinRel(f_ref, 1e-6));
        auto g = oracle::fd_gradient([&](const std::vector<double>& t) { return oracle::objective(p.X, p.y, t, C, 1.0); },
                                     theta);
        for (double gj : g) CHECK(std::abs(gj) <= 10 * o.tol);
    }
}

TEST_CASE("dual objective never increases across passes", "[solver][property]") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 30; ++trial) {
        auto p = random_problem(rng);
        solver_options o;
        o.record_trace = true;
        o.tol = 1e-12;
        o.max_iters = 200;
        auto r = train_ova_squared_hinge(from_dense(p.X), p.y, o);
        REQUIRE(!r.dual_objective.empty());
        for (std::size_t i = 1; i < r.dual_objective.size(); ++i)
            CHECK(r.dual_objective[i] <= r.dual_objective[i - 1] + 1e-12);
    }
}

TEST_CASE("weight threshold drops small weights only", "[solver]") {
    std::mt19937_64 rng(3);
    auto p = random_problem(rng);
    while (p.X.front().size() < 3) p = random_problem(rng);
    auto X = from_dense(p.X);
    auto exact = train_ova_squared_hinge(X, p.y);
    solver_options o;
    o.weight_threshold = 0.05;
    auto pruned = train_ova_squared_hinge(X, p.y, o);
    CHECK(pruned.model.bias == exact.model.bias);
    std::size_t kept = 0;
    for (std::size_t q = 0; q < exact.model.weights.nnz(); ++q)
        if (std::abs(exact.model.weights.values()[q]) >= 0.05) ++kept;
    CHECK(pruned.model.weights.nnz() == kept);
    for (double v : pruned.model.weights.values()) CHECK(std::abs(v) >= 0.05);
    o.weight_threshold = -1;
    CHECK_THROWS_AS(train_ova_squared_hinge(X, p.y, o), error);
}

TEST_CASE("solver input validation", "[solver]") {
    sparse_matrix X(2);
    X.append_row(sparse_vector(2, {0}, {1.0}));
    std::vector<int> bad{0};
    CHECK_THROWS_AS(train_ova_squared_hinge(X, bad), error);
    std::vector<int> y{1};
    solver_options o;
    o.C = -1;
    CHECK_THROWS_AS(train_ova_squared_hinge(X, y, o), error);
    CHECK_THROWS_AS(train_ova_squared_hinge(sparse_matrix(2), std::vector<int>{}), error);
}

TEST_CASE("squared_hinge_objective agrees with the dense oracle", "[solver]") {
    std::mt19937_64 rng(5);
    auto p = random_problem(rng);
    auto X = from_dense(p.X);
    std::vector<double> w(X.cols(), 0.3);
    std::vector<index_t> rows(X.rows());
    std::iota(rows.begin(), rows.end(), 0);
    auto theta = w;
    theta.push_back(-0.2);
    CHECK_THAT(squared_hinge_objective(X, rows, p.y, w, -0.2, 1.0, 1.0),
               WithinRel(oracle::objective(p.X, p.y, theta, 1.0, 1.0), 1e-12));
}

TEST_CASE("linear_block margins and file round-trip", "[solver][io]") {
    sparse_matrix W(4);
    W.append_row(sparse_vector(4, {0, 3}, {0.5, -1.0}));
    W.append_row(sparse_vector(4));
    linear_block block(W, {0.25, -1.0});
    sparse_vector x(4, {0, 1, 3}, {2.0, 5.0, 1.0});
    std::vector<double> m(2);
    block.margins(x, m);
    CHECK(m[0] == 0.5 * 2.0 - 1.0 + 0.25);
    CHECK(m[1] == -1.0);
    std::stringstream ss;
    write_linear_block(ss, block);
    CHECK(read_linear_block(ss) == block);
}
