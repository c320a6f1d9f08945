#pragma once

// Closed-form factors for Brownian motion over an Erlang(n, lambda) horizon.
// The supremum restricted to {J_sup = k} is a mixture of Erlang(i, lambda+)
// laws, i = 1..k, and the infimum a mixture of Erlang(i, lambda-) laws, with
// weights given by a triangular recursion in the number of stages.

#include <phwh/errors.hpp>

#include <cmath>
#include <string>
#include <vector>

namespace phwh {

/// Triangular table indexed 1 <= i <= k <= n, stored row-major by k.
class TriangularTable {
public:
    TriangularTable() = default;
    explicit TriangularTable(int n) : n_(n), data_(static_cast<std::size_t>(n * (n + 1) / 2), 0.0) {}

    [[nodiscard]] int size() const noexcept { return n_; }
    double& operator()(int i, int k) { return data_[offset(i, k)]; }
    [[nodiscard]] double operator()(int i, int k) const { return data_[offset(i, k)]; }

private:
    [[nodiscard]] std::size_t offset(int i, int k) const {
        return static_cast<std::size_t>((k - 1) * k / 2 + (i - 1));
    }

    int n_ = 0;
    std::vector<double> data_;
};

struct BmErlangWeights {
    int n = 0;
    double lambda = 0.0;
    double mu = 0.0;
    double sigma2 = 0.0;
    double lamPlus = 0.0;
    double lamMinus = 0.0;
    double thetaPlus = 0.0;
    double thetaMinus = 0.0;
    TriangularTable pBar;
    TriangularTable pUnder;
    std::vector<double> qBar;    ///< 1-based; qBar[0] unused
    std::vector<double> qUnder;  ///< 1-based; qUnder[0] unused
};

/// lambda+- = -+ mu / sigma2 + sqrt(mu^2 / sigma2^2 + 2 lambda / sigma2): rates of the
/// exponential supremum (+) and negated infimum (-) over an Exp(lambda) horizon.
inline double ladder_rate(double mu, double sigma2, double lambda, int sign) {
    return -sign * mu / sigma2 + std::sqrt(mu * mu / (sigma2 * sigma2) + 2.0 * lambda / sigma2);
}

inline BmErlangWeights compute_weights(int n, double lambda, double mu, double sigma2) {
    if (n < 1 || !(lambda > 0.0) || !(sigma2 > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "compute_weights needs n >= 1, lambda > 0, sigma2 > 0");
    }
    BmErlangWeights w;
    w.n = n;
    w.lambda = lambda;
    w.mu = mu;
    w.sigma2 = sigma2;
    w.lamPlus = ladder_rate(mu, sigma2, lambda, +1);
    w.lamMinus = ladder_rate(mu, sigma2, lambda, -1);
    // probability that an Exp(lambda+) exceeds an independent Exp(lambda-), and vice versa
    w.thetaPlus = w.lamMinus / (w.lamPlus + w.lamMinus);
    w.thetaMinus = w.lamPlus / (w.lamPlus + w.lamMinus);

    w.pBar = TriangularTable(n);
    w.pUnder = TriangularTable(n);
    w.pBar(1, 1) = 1.0;
    w.pUnder(1, 1) = 1.0;

    std::vector<double> powPlus(static_cast<std::size_t>(n + 1), 1.0);
    std::vector<double> powMinus(static_cast<std::size_t>(n + 1), 1.0);
    for (int j = 1; j <= n; ++j) {
        powPlus[static_cast<std::size_t>(j)] = powPlus[static_cast<std::size_t>(j - 1)] * w.thetaPlus;
        powMinus[static_cast<std::size_t>(j)] = powMinus[static_cast<std::size_t>(j - 1)] * w.thetaMinus;
    }

    // pBar(1;k) = pUnder(1;k) = 0 for k >= 2; entries for k use only k' < k
    // on the opposite side.
    for (int k = 2; k <= n; ++k) {
        for (int i = 2; i <= k; ++i) {
            double bar = 0.0;
            double under = 0.0;
            for (int l = i - 1; l <= k - 1; ++l) {
                double exceedPlus = 0.0;
                double exceedMinus = 0.0;
                for (int j = 1; j <= k - l; ++j) {
                    exceedPlus += w.pUnder(j, k - l) * powPlus[static_cast<std::size_t>(j)];
                    exceedMinus += w.pBar(j, k - l) * powMinus[static_cast<std::size_t>(j)];
                }
                bar += w.pBar(i - 1, l) * exceedPlus;
                under += w.pUnder(i - 1, l) * exceedMinus;
            }
            w.pBar(i, k) = bar;
            w.pUnder(i, k) = under;
        }
    }

    w.qBar.assign(static_cast<std::size_t>(n + 1), 0.0);
    w.qUnder.assign(static_cast<std::size_t>(n + 1), 0.0);
    for (int k = 1; k <= n; ++k) {
        for (int i = 1; i <= k; ++i) {
            w.qBar[static_cast<std::size_t>(k)] += w.pBar(i, k);
            w.qUnder[static_cast<std::size_t>(k)] += w.pUnder(i, k);
        }
    }
    return w;
}

/// Erlang(shape, rate) density, evaluated in log space.
inline double erlang_density(int shape, double rate, double x) {
    if (x < 0.0) {
        return 0.0;
    }
    if (x == 0.0) {
        return shape == 1 ? rate : 0.0;
    }
    return std::exp(shape * std::log(rate) + (shape - 1) * std::log(x) - rate * x -
                    std::lgamma(static_cast<double>(shape)));
}

namespace bm_erlang_detail {

inline void check_stage(const BmErlangWeights& w, int k) {
    if (k < 1 || k > w.n) {
        throw Error(ErrorCode::IndexOutOfRange,
                    "stage " + std::to_string(k) + " outside [1, " + std::to_string(w.n) + "]");
    }
}

inline double mixture(const TriangularTable& p, int k, double rate, double x) {
    double sum = 0.0;
    for (int i = 1; i <= k; ++i) {
        sum += p(i, k) * erlang_density(i, rate, x);
    }
    return sum;
}

} // namespace bm_erlang_detail

/// P(sup in dx, J_sup = k) / dx, stages numbered 1..n.
inline double sup_density_erlang(const BmErlangWeights& w, double x, int k) {
    bm_erlang_detail::check_stage(w, k);
    return w.qUnder[static_cast<std::size_t>(w.n - k + 1)] *
           bm_erlang_detail::mixture(w.pBar, k, w.lamPlus, x);
}

/// P(-inf in dx, J_inf = k) / dx, stages numbered 1..n.
inline double inf_density_erlang(const BmErlangWeights& w, double x, int k) {
    bm_erlang_detail::check_stage(w, k);
    return w.qBar[static_cast<std::size_t>(w.n - k + 1)] *
           bm_erlang_detail::mixture(w.pUnder, k, w.lamMinus, x);
}

/// P(sup in dx, sup - X_tau in dy, J_sup = k) / (dx dy).
inline double joint_density_erlang(const BmErlangWeights& w, double x, double y, int k) {
    bm_erlang_detail::check_stage(w, k);
    return bm_erlang_detail::mixture(w.pBar, k, w.lamPlus, x) *
           bm_erlang_detail::mixture(w.pUnder, w.n - k + 1, w.lamMinus, y);
}

/// P(J_sup = k) = qUnder(n-k+1) qBar(k).
inline double phase_at_sup_erlang(const BmErlangWeights& w, int k) {
    bm_erlang_detail::check_stage(w, k);
    return w.qUnder[static_cast<std::size_t>(w.n - k + 1)] * w.qBar[static_cast<std::size_t>(k)];
}

} // namespace phwh
