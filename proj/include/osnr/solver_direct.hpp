#pragma once

// Direct solution of the mixed player/seeker system: feasibility analysis,
// u = Gamma_bar^{-1} b_bar, solution verification, and the infinity-norm
// power bounds driven by the condition number of Gamma_bar.

#include <osnr/errors.hpp>
#include <osnr/model.hpp>

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace osnr {

struct FeasibilityReport {
    std::vector<bool> seeker_condition;  ///< gamma_i * sum_j Gamma_ij < 1, per seeker
    std::vector<bool> player_condition;  ///< a_i > sum_{j != i} Gamma_ij, per player
    bool strictly_diagonally_dominant = false;
    bool nonsingular = false;
    /// Per row of Gamma_bar: |own-column entry| - sum of |other entries|.
    Vector margins;
    double smallest_pivot = 0.0;

    [[nodiscard]] bool hypotheses_hold() const {
        return std::all_of(seeker_condition.begin(), seeker_condition.end(), [](bool b) { return b; }) &&
               std::all_of(player_condition.begin(), player_condition.end(), [](bool b) { return b; });
    }
};

struct BoundsReport {
    Vector player_row_sums;  ///< T_i = a_i + sum_{j != i} Gamma_ij
    Vector seeker_levels;    ///< S_k = 2 - 2 gamma_k Gamma_kk
    bool preconditions_hold = false;
    /// preconditions_hold and strict diagonal dominance: the bounds are guaranteed.
    bool guaranteed = false;
    double kappa_inf = 1.0;
    double lower_inf = 0.0;
    std::optional<double> upper_inf;  ///< absent when there are no players
    double euclid_lower = 0.0;
    std::optional<double> euclid_upper;
};

struct Solution {
    PowerVector u;
    Vector osnr;     ///< ratio; NaN where the denominator is not positive
    Vector osnr_db;  ///< NaN where the ratio is not positive
    Vector seeker_residuals;      ///< |OSNR_i - gamma_i| / gamma_i, seeker order
    Vector player_foc_residuals;  ///< |a_i u_i + X_-i - a_i beta_i / alpha_i|, player order
    double relative_residual = 0.0;  ///< ||Gamma_bar u - b_bar||_inf / ||b_bar||_inf
    bool nonnegative = true;
    std::vector<std::string> warnings;
};

struct PowerLimits {
    std::optional<double> min_mW;
    std::optional<double> max_mW;
};

namespace detail {

struct Factorization {
    Eigen::PartialPivLU<Matrix> lu;
    double smallest_pivot = 0.0;
    double threshold = 0.0;

    [[nodiscard]] bool singular() const { return !(smallest_pivot >= threshold) || smallest_pivot == 0.0; }
};

/// Singular when the smallest pivot drops below 1e-12 * ||A||_inf.
inline Factorization factorize(const Matrix& a) {
    Factorization f{Eigen::PartialPivLU<Matrix>(a), 0.0, 0.0};
    f.threshold = 1e-12 * a.cwiseAbs().rowwise().sum().maxCoeff();
    f.smallest_pivot = a.rows() == 0 ? 0.0 : f.lu.matrixLU().diagonal().cwiseAbs().minCoeff();
    return f;
}

inline Vector solve_refined(const Factorization& f, const Matrix& a, const Vector& b) {
    Vector x = f.lu.solve(b);
    // One refinement step with the residual accumulated in extended precision.
    Vector r(b.size());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        long double acc = b(i);
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            acc -= static_cast<long double>(a(i, j)) * static_cast<long double>(x(j));
        r(i) = static_cast<double>(acc);
    }
    x += f.lu.solve(r);
    return x;
}

inline double inf_norm(const Matrix& a) { return a.rows() == 0 ? 0.0 : a.cwiseAbs().rowwise().sum().maxCoeff(); }
inline double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

}  // namespace detail

[[nodiscard]] inline FeasibilityReport check_feasibility(const StackedSystem& stack) {
    const SystemMatrix& sys = stack.system;
    const ServicePartition& part = stack.partition;
    FeasibilityReport report;
    for (std::size_t i : stack.synthetic ? std::vector<std::size_t>{} : part.seekers()) {
        const double row_sum = sys.gamma.row(detail::idx(i)).sum();
        report.seeker_condition.push_back(part.seeker(i).gamma * row_sum < 1.0);
    }
    for (std::size_t i : stack.synthetic ? std::vector<std::size_t>{} : part.players()) {
        const auto k = detail::idx(i);
        const double off = sys.gamma.row(k).sum() - sys.gamma(k, k);
        report.player_condition.push_back(part.player(i).a > off);
    }
    const auto n = detail::idx(stack.size());
    report.margins.resize(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto c = detail::idx(stack.row_channel(static_cast<std::size_t>(r)));
        const double diag = std::abs(stack.gamma_bar(r, c));
        report.margins(r) = 2.0 * diag - stack.gamma_bar.row(r).cwiseAbs().sum();
    }
    report.strictly_diagonally_dominant = (report.margins.array() > 0.0).all();
    const auto f = detail::factorize(stack.gamma_bar);
    report.smallest_pivot = f.smallest_pivot;
    report.nonsingular = !f.singular();
    return report;
}

/// Evaluates OSNR and equilibrium residuals at an arbitrary power vector.
[[nodiscard]] inline Solution evaluate_solution(const StackedSystem& stack, const PowerVector& u) {
    const SystemMatrix& sys = stack.system;
    const ServicePartition& part = stack.partition;
    const auto n = detail::idx(stack.size());
    if (u.size() != n) throw Error(ErrorKind::Dimension, "solution length does not match system size");

    Solution s;
    s.u = u;
    s.osnr.resize(n);
    s.osnr_db.resize(n);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (Eigen::Index i = 0; i < n; ++i) {
        const double denom = noise_floor(u, sys, static_cast<std::size_t>(i));
        s.osnr(i) = denom > 0.0 ? u(i) / denom : nan;
        s.osnr_db(i) = s.osnr(i) > 0.0 ? 10.0 * std::log10(s.osnr(i)) : nan;
    }
    s.seeker_residuals.resize(detail::idx(part.seekers().size()));
    for (std::size_t r = 0; r < part.seekers().size(); ++r) {
        const std::size_t i = part.seekers()[r];
        const double g = part.seeker(i).gamma;
        s.seeker_residuals(detail::idx(r)) = std::abs(s.osnr(detail::idx(i)) - g) / g;
    }
    s.player_foc_residuals.resize(detail::idx(part.players().size()));
    for (std::size_t r = 0; r < part.players().size(); ++r) {
        const std::size_t i = part.players()[r];
        const PlayerParams& p = part.player(i);
        const double lhs = p.a * u(detail::idx(i)) + interference(u, sys, i);
        s.player_foc_residuals(detail::idx(r)) = std::abs(lhs - p.a * p.beta / p.alpha);
    }
    const double b_norm = detail::inf_norm(stack.b_bar);
    const double r_norm = detail::inf_norm(Vector(stack.gamma_bar * u - stack.b_bar));
    s.relative_residual = b_norm > 0.0 ? r_norm / b_norm : r_norm;

    s.nonnegative = (u.array() >= 0.0).all();
    if (!s.nonnegative) {
        std::string msg = "negative power on channel(s)";
        for (Eigen::Index i = 0; i < n; ++i)
            if (u(i) < 0.0) msg += " " + std::to_string(i + 1);
        msg += "; prices and targets admit no nonnegative allocation";
        if (part.players().size() == 1 && part.seekers().size() == 1) {
            const auto p = detail::idx(part.players()[0]);
            const auto q = detail::idx(part.seekers()[0]);
            if (sys.gamma(p, q) > 0.0 && sys.gamma(q, q) < 1.0) {
                const double s2 = stack.b_tilde(0) / sys.gamma(p, q);
                const double need = sys.n0(q) / (1.0 - sys.gamma(q, q));
                msg += " (two-channel diagnostic: s2 = " + detail::num(s2) + ", n0/(1-Gamma_qq) = " +
                       detail::num(need) + ")";
            }
        }
        s.warnings.push_back(msg);
    }
    return s;
}

/// Minimum total power allocation: the unique extreme point u = Gamma_bar^{-1} b_bar.
[[nodiscard]] inline Solution solve_dsnp(const StackedSystem& stack) {
    const auto f = detail::factorize(stack.gamma_bar);
    if (f.singular()) throw SingularError(f.smallest_pivot, f.threshold);
    Solution s = evaluate_solution(stack, detail::solve_refined(f, stack.gamma_bar, stack.b_bar));
    if (!check_feasibility(stack).strictly_diagonally_dominant)
        s.warnings.push_back("Gamma_bar is not strictly diagonally dominant; uniqueness/convergence not certified");
    return s;
}

/// Central cost problem: every channel is a target seeker.
[[nodiscard]] inline Solution solve_ccp(const StackedSystem& stack) {
    if (stack.player_count() != 0)
        throw Error(ErrorKind::Usage, "solve_ccp requires an all-seeker partition");
    return solve_dsnp(stack);
}

/// Pure game: every channel is a player and the solution is the Nash equilibrium.
[[nodiscard]] inline Solution solve_ne(const StackedSystem& stack) {
    if (stack.seeker_count() != 0)
        throw Error(ErrorKind::Usage, "solve_ne requires an all-player partition");
    return solve_dsnp(stack);
}

[[nodiscard]] inline BoundsReport power_bounds(const StackedSystem& stack) {
    const auto f = detail::factorize(stack.gamma_bar);
    if (f.singular()) throw SingularError(f.smallest_pivot, f.threshold);
    const SystemMatrix& sys = stack.system;
    const ServicePartition& part = stack.partition;
    const auto& players = part.players();
    const auto& seekers = part.seekers();

    BoundsReport b;
    b.player_row_sums.resize(detail::idx(players.size()));
    b.seeker_levels.resize(detail::idx(seekers.size()));
    double max_two_a = 0.0;
    double max_price = 0.0;
    for (std::size_t r = 0; r < players.size(); ++r) {
        const auto i = detail::idx(players[r]);
        const PlayerParams& p = part.player(players[r]);
        b.player_row_sums(detail::idx(r)) = p.a + sys.gamma.row(i).sum() - sys.gamma(i, i);
        max_two_a = std::max(max_two_a, 2.0 * p.a);
        max_price = r == 0 ? p.price_ratio() : std::max(max_price, p.price_ratio());
    }
    double max_seeker_rhs = 0.0;
    for (std::size_t r = 0; r < seekers.size(); ++r) {
        const auto k = detail::idx(seekers[r]);
        b.seeker_levels(detail::idx(r)) = 2.0 - 2.0 * part.seeker(seekers[r]).gamma * sys.gamma(k, k);
        max_seeker_rhs = std::max(max_seeker_rhs, stack.b_hat(detail::idx(r)));
    }

    bool pre = !players.empty();
    for (std::size_t r = 0; r < players.size() && pre; ++r) {
        if (!(stack.b_tilde(detail::idx(r)) > 0.0)) pre = false;
        for (std::size_t q = 0; q < seekers.size() && pre; ++q)
            pre = b.player_row_sums(detail::idx(r)) > b.seeker_levels(detail::idx(q)) &&
                  stack.b_tilde(detail::idx(r)) > stack.b_hat(detail::idx(q));
    }
    b.preconditions_hold = pre;
    b.guaranteed = pre && check_feasibility(stack).strictly_diagonally_dominant;

    const Matrix inverse = f.lu.inverse();
    b.kappa_inf = detail::inf_norm(stack.gamma_bar) * detail::inf_norm(inverse);
    b.lower_inf = (players.empty() || seekers.empty()) ? 0.0 : max_seeker_rhs / max_two_a;
    if (!players.empty()) b.upper_inf = b.kappa_inf * max_price;
    b.euclid_lower = b.lower_inf;
    if (b.upper_inf) b.euclid_upper = std::sqrt(static_cast<double>(stack.size())) * *b.upper_inf;
    return b;
}

/// Post-hoc check of optional per-channel power limits; limits are not enforced.
[[nodiscard]] inline std::vector<std::string> check_power_limits(const PowerVector& u,
                                                                 const std::vector<PowerLimits>& limits) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < limits.size() && detail::idx(i) < u.size(); ++i) {
        const double v = u(detail::idx(i));
        if (limits[i].min_mW && v < *limits[i].min_mW)
            out.push_back("channel " + std::to_string(i + 1) + ": power " + detail::num(v) +
                          " mW below minimum " + detail::num(*limits[i].min_mW) + " mW");
        if (limits[i].max_mW && v > *limits[i].max_mW)
            out.push_back("channel " + std::to_string(i + 1) + ": power " + detail::num(v) +
                          " mW above maximum " + detail::num(*limits[i].max_mW) + " mW");
    }
    return out;
}

}  // namespace osnr
