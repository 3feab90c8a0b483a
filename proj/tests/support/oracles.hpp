#pragma once

// Reference computations for the test suite. These are written from the
// model definitions directly and share no code with the library beyond the
// plain data types.

#include <osnr/model.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

using osnr::Matrix;
using osnr::Vector;

/// Explicit 2x2 inverse via the adjugate.
inline Matrix inverse2(const Matrix& m) {
    const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    Matrix inv(2, 2);
    inv << m(1, 1) / det, -m(0, 1) / det, -m(1, 0) / det, m(0, 0) / det;
    return inv;
}

/// Gaussian elimination with partial pivoting in long double.
inline Vector gauss_solve(const Matrix& a, const Vector& b) {
    const auto n = a.rows();
    std::vector<std::vector<long double>> m(static_cast<std::size_t>(n), std::vector<long double>(n + 1));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) m[i][j] = a(i, j);
        m[i][n] = b(i);
    }
    for (Eigen::Index col = 0; col < n; ++col) {
        Eigen::Index pivot = col;
        for (Eigen::Index r = col + 1; r < n; ++r)
            if (std::fabs(m[r][col]) > std::fabs(m[pivot][col])) pivot = r;
        std::swap(m[col], m[pivot]);
        for (Eigen::Index r = col + 1; r < n; ++r) {
            const long double f = m[r][col] / m[col][col];
            for (Eigen::Index c = col; c <= n; ++c) m[r][c] -= f * m[col][c];
        }
    }
    Vector x(n);
    for (Eigen::Index i = n - 1; i >= 0; --i) {
        long double acc = m[i][n];
        for (Eigen::Index j = i + 1; j < n; ++j) acc -= m[i][j] * static_cast<long double>(x(j));
        x(i) = static_cast<double>(acc / m[i][i]);
    }
    return x;
}

inline double inf_norm(const Matrix& m) { return m.cwiseAbs().rowwise().sum().maxCoeff(); }

/// Gamma for two channels on one link with one span: the sums over links and
/// spans collapse to a single term, (G_j / G_i) * ASE_i / P0.
inline Matrix gamma_single_span(double gain1, double gain2, double ase1_mW, double ase2_mW, double p0_mW) {
    Matrix g(2, 2);
    const std::array<double, 2> gain{gain1, gain2};
    const std::array<double, 2> ase{ase1_mW, ase2_mW};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) g(i, j) = gain[j] / gain[i] * ase[i] / p0_mW;
    return g;
}

/// Generic 5-span link, expanded by hand for two channels: each span k adds
/// (prod_{q<=k} g_j,q l_q / prod_{q<=k} g_i,q l_q) * ASE_i / P0.
inline Matrix gamma_multi_span(const std::vector<std::array<double, 2>>& gains, const std::vector<double>& losses,
                               const std::vector<std::array<double, 2>>& ase, double p0_mW) {
    Matrix g = Matrix::Zero(2, 2);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            double ci = 1.0;
            double cj = 1.0;
            for (std::size_t k = 0; k < gains.size(); ++k) {
                ci *= gains[k][i] * losses[k];
                cj *= gains[k][j] * losses[k];
                g(i, j) += cj / ci * ase[k][i] / p0_mW;
            }
        }
    return g;
}

struct Instance {
    osnr::SystemMatrix sys;
    osnr::ServicePartition partition;
};

struct InstanceOptions {
    int min_n = 2;
    int max_n = 30;
    double sigma_cap = 0.9;
    /// Require T_i > S_k and b~_i > b^_k as well.
    bool bounds_preconditions = false;
    bool need_both_roles = true;
};

/// Random instance satisfying a_i > sum_{j!=i} Gamma_ij and gamma_k sum_j Gamma_kj < 1,
/// with every per-row contraction factor at most sigma_cap and b~ > 0.
inline Instance random_instance(std::mt19937_64& rng, const InstanceOptions& opt = {}) {
    std::uniform_int_distribution<int> size_dist(opt.min_n, opt.max_n);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int n = size_dist(rng);
    Instance out;
    out.sys.gamma.resize(n, n);
    out.sys.n0.resize(n);
    for (int i = 0; i < n; ++i) {
        out.sys.n0(i) = 0.005 + 0.015 * unit(rng);
        for (int j = 0; j < n; ++j) out.sys.gamma(i, j) = (0.1 + 0.9 * unit(rng)) * 1e-3;
    }
    std::vector<bool> player(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) player[i] = unit(rng) < 0.5;
    if (opt.need_both_roles && n >= 2) {
        player[0] = true;
        player[1] = false;
    }
    std::vector<osnr::Role> roles;
    double max_seeker_rhs = 0.0;
    std::vector<osnr::SeekerParams> seekers(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        if (player[i]) continue;
        const double row = out.sys.gamma.row(i).sum();
        seekers[i].gamma = (0.05 + (opt.sigma_cap - 0.05) * unit(rng)) / row;
        max_seeker_rhs = std::max(max_seeker_rhs, seekers[i].gamma * out.sys.n0(i));
    }
    for (int i = 0; i < n; ++i) {
        if (!player[i]) {
            roles.emplace_back(seekers[i]);
            continue;
        }
        const double off = out.sys.gamma.row(i).sum() - out.sys.gamma(i, i);
        osnr::PlayerParams p;
        p.alpha = 0.5 + unit(rng);
        p.a = off / opt.sigma_cap * (1.0 + 4.0 * unit(rng));
        double price = 1.0 + 9.0 * unit(rng);
        if (opt.bounds_preconditions) {
            p.a = std::max(p.a, 2.0 + off) * (1.0 + unit(rng));
            price = std::max(price, (max_seeker_rhs + out.sys.n0(i)) / p.a * (1.1 + 2.0 * unit(rng)));
        }
        // Keep b~_i = a_i price - n0_i positive.
        if (p.a > 0.0) price = std::max(price, out.sys.n0(i) / p.a * (2.0 + unit(rng)));
        p.beta = price * p.alpha;
        roles.emplace_back(p);
    }
    out.partition = osnr::ServicePartition(std::move(roles));
    return out;
}

/// Absolute rounding allowance for one Jacobi step measured against a rounded
/// reference: a few ulps of the largest term entering any channel update.
double step_rounding(const Instance& inst, const Vector& u) {
    const auto n = static_cast<Eigen::Index>(inst.sys.size());
    double largest = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double x = inst.sys.n0(i) + inst.sys.gamma.row(i).dot(u.cwiseAbs());
        const auto k = static_cast<std::size_t>(i);
        double term = 0.0;
        if (inst.partition.is_player(k)) {
            const auto& p = inst.partition.player(k);
            term = std::abs(p.beta / p.alpha) + x / p.a;
        } else {
            const double g = inst.partition.seeker(k).gamma;
            term = g * x / std::abs(1.0 - g * inst.sys.gamma(i, i));
        }
        largest = std::max(largest, term);
    }
    constexpr double eps = std::numeric_limits<double>::epsilon();
    return 16.0 * eps * largest + 4.0 * eps * u.cwiseAbs().maxCoeff();
}

/// Exhaustive zoomed grid search of min ||Gt u - bt||_2 s.t. Gh u >= bh over
/// the box [-radius, radius]^N, for N <= 3.
inline double grid_qp(const Matrix& gt, const Vector& bt, const Matrix& gh, const Vector& bh, double radius,
                      int points = 81, int levels = 4) {
    const auto n = gt.cols();
    Vector center = Vector::Zero(n);
    double half = radius;
    double best = std::numeric_limits<double>::infinity();
    Vector best_u = center;
    for (int level = 0; level < levels; ++level) {
        const double h = 2.0 * half / (points - 1);
        std::array<int, 3> idx{0, 0, 0};
        const int total = n == 1 ? points : (n == 2 ? points * points : points * points * points);
        for (int flat = 0; flat < total; ++flat) {
            int rem = flat;
            for (Eigen::Index k = 0; k < n; ++k) {
                idx[static_cast<std::size_t>(k)] = rem % points;
                rem /= points;
            }
            Vector u(n);
            for (Eigen::Index k = 0; k < n; ++k) u(k) = center(k) - half + h * idx[static_cast<std::size_t>(k)];
            if (((gh * u - bh).array() < 0.0).any()) continue;
            const double value = (gt * u - bt).norm();
            if (value < best) {
                best = value;
                best_u = u;
            }
        }
        center = best_u;
        half = 4.0 * h;
    }
    return best;
}

struct QpInstance {
    Matrix gamma_tilde;
    Vector b_tilde;
    Matrix gamma_hat;
    Vector b_hat;
};

/// Small stacked system (N <= 3, n <= 2). With probability one half the first
/// seeker row is a positive multiple of a player-row combination with a
/// conflicting right-hand side, so the player set misses the seeker region.
inline QpInstance random_qp_instance(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> size_dist(2, 3);
    const int n_total = size_dist(rng);
    const int n = std::uniform_int_distribution<int>(1, std::min(2, n_total - 1))(rng);
    const int m = n_total - n;
    QpInstance q;
    q.gamma_tilde.resize(m, n_total);
    q.b_tilde.resize(m);
    q.gamma_hat.resize(n, n_total);
    q.b_hat.resize(n);
    for (int r = 0; r < m; ++r) {
        for (int c = 0; c < n_total; ++c) q.gamma_tilde(r, c) = 2.0 * unit(rng) - 1.0;
        q.b_tilde(r) = 2.0 * unit(rng) - 1.0;
    }
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n_total; ++c) q.gamma_hat(r, c) = 2.0 * unit(rng) - 1.0;
        q.b_hat(r) = 2.0 * unit(rng) - 1.0;
    }
    if (unit(rng) < 0.5) {
        Vector w(m);
        for (int r = 0; r < m; ++r) w(r) = 0.5 + unit(rng);
        const double s = 0.5 + unit(rng);
        q.gamma_hat.row(0) = s * (w.transpose() * q.gamma_tilde);
        q.b_hat(0) = s * w.dot(q.b_tilde) + 0.2 + 0.8 * unit(rng);
    }
    return q;
}

/// Central finite difference of the player cost in u_i, written out from
/// J_i = alpha u_i - beta ln(1 + a u_i / X_-i).
inline double cost_derivative(const osnr::SystemMatrix& sys, const osnr::PlayerParams& p, const Vector& u,
                              Eigen::Index i) {
    auto cost = [&](double ui) {
        double x = sys.n0(i);
        for (Eigen::Index j = 0; j < u.size(); ++j)
            if (j != i) x += sys.gamma(i, j) * u(j);
        return p.alpha * ui - p.beta * std::log(1.0 + p.a * ui / x);
    };
    const double h = 1e-6 * std::max(1.0, std::abs(u(i)));
    return (cost(u(i) + h) - cost(u(i) - h)) / (2.0 * h);
}

}  // namespace oracle
