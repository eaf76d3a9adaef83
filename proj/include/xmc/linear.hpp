// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "xmc/sparse.hpp"

namespace xmc {

struct solver_options {
    double C = 1.0;
    std::size_t max_iters = 1000;
    double tol = 1e-4;
    /// Value of the appended constant feature; 0 disables the bias term.
    double bias = 1.0;
    std::uint64_t seed = 0;
    /// Records the dual objective after every outer pass.
    bool record_trace = false;
    /// Weights with magnitude below this are dropped from the returned
    /// model (the bias is kept); 0 keeps the exact solution.
    double weight_threshold = 0.0;
};

struct linear_model {
    sparse_vector weights;
    double bias = 0.0;
};

struct solver_result {
    linear_model model;
    std::size_t iterations = 0;
    bool converged = false;
    double max_projected_gradient = 0.0;
    std::vector<double> dual_objective;
};

/// Primal objective 0.5 * (|w|^2 + b^2) + C * sum_i max(0, 1 - y_i (w.x_i + b*bias))^2,
/// where `bias_weight` is the coefficient of the constant feature.
inline double squared_hinge_objective(const sparse_matrix& X, std::span<const index_t> rows,
                                      std::span<const int> y, std::span<const double> w, double bias_weight,
                                      double C, double bias_value) {
    double reg = squared_norm(w) + bias_weight * bias_weight;
    double loss = 0.0;
    for (std::size_t n = 0; n < rows.size(); ++n) {
        double m = dot(X.row(rows[n]), w) + bias_weight * bias_value;
        double slack = std::max(0.0, 1.0 - y[n] * m);
        loss += slack * slack;
    }
    return 0.5 * reg + C * loss;
}

namespace detail {

/// Max-norm of the primal gradient w - 2C sum_i slack_i y_i x_i, bias included.
inline double primal_gradient_max(const sparse_matrix& X, std::span<const index_t> rows, std::span<const int> y,
                                  std::span<const double> w, double wb, const solver_options& opts,
                                  std::vector<double>& grad) {
    grad.assign(w.begin(), w.end());
    double gb = wb;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto x = X.row(rows[i]);
        double slack = 1.0 - y[i] * (dot(x, w) + wb * opts.bias);
        if (slack <= 0.0) continue;
        double c = -2.0 * opts.C * slack * y[i];
        axpy(c, x, grad);
        gb += c * opts.bias;
    }
    double m = std::abs(gb);
    for (double g : grad) m = std::max(m, std::abs(g));
    return m;
}

} // namespace detail

/// L2-regularized squared-hinge binary SVM over the rows `rows` of X with
/// labels y in {-1, +1}, solved by dual coordinate descent. The bias is an
/// appended constant feature of value `opts.bias` (and so is regularized).
/// Stops once the largest projected-gradient magnitude over a full pass
/// drops below `opts.tol` and the primal gradient max-norm at the current
/// iterate does too.
inline solver_result train_ova_squared_hinge(const sparse_matrix& X, std::span<const index_t> rows,
                                             std::span<const int> y, const solver_options& opts = {}) {
    const std::size_t n = rows.size();
    if (n == 0) throw error(errc::bad_input, "solver needs at least one training row");
    if (y.size() != n) throw error(errc::bad_input, "target count does not match row count");
    if (!(opts.C > 0.0) || !std::isfinite(opts.C)) throw error(errc::bad_input, "C must be positive and finite");
    if (!(opts.weight_threshold >= 0.0)) throw error(errc::bad_input, "weight threshold must be non-negative");
    for (int t : y)
        if (t != 1 && t != -1) throw error(errc::bad_input, "targets must be +1 or -1");
    for (index_t r : rows)
        if (r >= X.rows()) throw error(errc::bad_input, "row id out of range");

    const double diag = 0.5 / opts.C;
    const double b2 = opts.bias * opts.bias;
    std::vector<double> w(X.cols(), 0.0), alpha(n, 0.0), qdiag(n);
    double wb = 0.0;
    std::vector<double> grad;
    for (std::size_t i = 0; i < n; ++i) qdiag[i] = squared_norm(X.row(rows[i])) + b2 + diag;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(opts.seed);
    solver_result res;

    for (std::size_t iter = 0; iter < opts.max_iters; ++iter) {
        std::shuffle(order.begin(), order.end(), rng);
        double max_pg = 0.0;
        for (std::size_t i : order) {
            auto x = X.row(rows[i]);
            const double yi = y[i];
            double g = yi * (dot(x, w) + wb * opts.bias) - 1.0 + diag * alpha[i];
            double pg = alpha[i] == 0.0 ? std::min(g, 0.0) : g;
            max_pg = std::max(max_pg, std::abs(pg));
            if (pg == 0.0) continue;
            double next = std::max(alpha[i] - g / qdiag[i], 0.0);
            double step = (next - alpha[i]) * yi;
            alpha[i] = next;
            axpy(step, x, w);
            wb += step * opts.bias;
        }
        res.iterations = iter + 1;
        res.max_projected_gradient = max_pg;
        if (opts.record_trace) {
            double sum_a = 0.0, sum_a2 = 0.0;
            for (double a : alpha) {
                sum_a += a;
                sum_a2 += a * a;
            }
            res.dual_objective.push_back(0.5 * (squared_norm(w) + wb * wb) + 0.5 * diag * sum_a2 - sum_a);
        }
        if (max_pg < opts.tol && detail::primal_gradient_max(X, rows, y, w, wb, opts, grad) < opts.tol) {
            res.converged = true;
            break;
        }
    }
    if (opts.weight_threshold > 0.0)
        for (double& v : w)
            if (std::abs(v) < opts.weight_threshold) v = 0.0;
    res.model.weights = sparse_vector::from_dense(w);
    res.model.bias = wb * opts.bias;
    return res;
}

/// Full-matrix convenience overload.
inline solver_result train_ova_squared_hinge(const sparse_matrix& X, std::span<const int> y,
                                             const solver_options& opts = {}) {
    std::vector<index_t> rows(X.rows());
    std::iota(rows.begin(), rows.end(), 0);
    return train_ova_squared_hinge(X, rows, y, opts);
}

inline double sigmoid(double s) noexcept { return 1.0 / (1.0 + std::exp(-s)); }

/// A bank of linear scorers sharing one feature space. Margins are
/// accumulated feature-by-feature through the transposed weights, in
/// increasing feature order.
class linear_block {
  public:
    linear_block() = default;

    linear_block(sparse_matrix weights, std::vector<double> bias)
        : weights_(std::move(weights)), by_feature_(weights_.transpose()), bias_(std::move(bias)) {
        if (bias_.size() != weights_.rows()) throw error(errc::bad_input, "bias count does not match weight rows");
        for (double b : bias_)
            if (!std::isfinite(b)) throw error(errc::bad_input, "non-finite bias");
    }

    std::size_t size() const noexcept { return bias_.size(); }
    std::size_t feature_dim() const noexcept { return weights_.cols(); }
    const sparse_matrix& weights() const noexcept { return weights_; }
    const std::vector<double>& bias() const noexcept { return bias_; }

    /// out[m] = w_m . x + b_m
    void margins(sparse_view x, std::span<double> out) const {
        if (x.dim != feature_dim())
            throw error(errc::dimension_mismatch, "instance dim " + std::to_string(x.dim) + " != model dim " +
                                                      std::to_string(feature_dim()));
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t p = 0; p < x.nnz(); ++p) {
            auto col = by_feature_.row(x.indices[p]);
            const double xv = x.values[p];
            for (std::size_t q = 0; q < col.nnz(); ++q) out[col.indices[q]] += xv * col.values[q];
        }
        for (std::size_t m = 0; m < size(); ++m) out[m] += bias_[m];
    }

    friend bool operator==(const linear_block& a, const linear_block& b) {
        return a.weights_ == b.weights_ && a.bias_ == b.bias_;
    }

  private:
    sparse_matrix weights_;
    sparse_matrix by_feature_;
    std::vector<double> bias_;
};

// Model file: "rows feature_dim", one weight row per line in sparse-row
// format, then one bias per line.

inline void write_linear_block(std::ostream& out, const linear_block& block) {
    out << block.size() << ' ' << block.feature_dim() << '\n';
    for (std::size_t m = 0; m < block.size(); ++m) write_sparse_row(out, block.weights().row(m));
    for (double b : block.bias()) out << detail::format_exact(b) << '\n';
}

inline linear_block read_linear_block(std::istream& in) {
    std::string line;
    std::size_t line_no = 1, rows = 0, dim = 0;
    if (!std::getline(in, line)) throw detail::parse_failure("missing model header", line_no);
    auto head = detail::split_ws(line);
    if (head.size() != 2 || !detail::parse_int(head[0], rows) || !detail::parse_int(head[1], dim))
        throw detail::parse_failure("bad model header, expected 'K feature_dim'", line_no);
    sparse_matrix w(dim);
    for (std::size_t m = 0; m < rows; ++m) {
        if (!std::getline(in, line)) throw detail::parse_failure("truncated weights", line_no + 1);
        ++line_no;
        w.append_row(parse_sparse_row(line, dim, line_no).view());
    }
    std::vector<double> bias(rows);
    for (std::size_t m = 0; m < rows; ++m) {
        if (!std::getline(in, line)) throw detail::parse_failure("truncated biases", line_no + 1);
        ++line_no;
        auto toks = detail::split_ws(line);
        if (toks.size() != 1 || !detail::parse_double(toks[0], bias[m]))
            throw detail::parse_failure("bad bias", line_no);
    }
    return linear_block(std::move(w), std::move(bias));
}

inline void save_linear_block(const std::string& path, const linear_block& block) {
    auto out = detail::open_out(path);
    write_linear_block(out, block);
}

inline linear_block load_linear_block(const std::string& path) {
    auto in = detail::open_in(path);
    return read_linear_block(in);
}

} // namespace xmc
