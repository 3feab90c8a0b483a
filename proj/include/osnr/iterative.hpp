#pragma once

// Distributed power update. Each channel adjusts its power from its own
// measured OSNR only; all channels update simultaneously from the same step:
//
//   player i:  u_i+ = beta_i/alpha_i - (1/a_i) (1/OSNR_i(u) - Gamma_ii) u_i
//   seeker i:  u_i+ = gamma_i / (1 - gamma_i Gamma_ii) (1/OSNR_i(u) - Gamma_ii) u_i
//
// Under strict diagonal dominance of Gamma_bar the map contracts towards
// Gamma_bar^{-1} b_bar in the infinity norm with factor convergence_rate().

#include <osnr/errors.hpp>
#include <osnr/model.hpp>

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace osnr {

struct IterationConfig {
    PowerVector u0;
    double tol = 1e-8;  ///< on ||u(n+1) - u(n)||_inf, mW
    int max_iter = 10000;
    bool record_trace = true;
    /// Abort on the first iterate with a negative component.
    bool strict_nonneg = false;

    /// Uniform 0.5 mW start. The choice is arbitrary; convergence does not depend on it.
    static IterationConfig defaults(std::size_t n) {
        IterationConfig c;
        c.u0 = PowerVector::Constant(static_cast<Eigen::Index>(n), 0.5);
        return c;
    }
};

struct IterationTrace {
    std::vector<PowerVector> iterates;   ///< u(0) .. u(steps); only the last one unless record_trace
    std::vector<Vector> osnr_db_history; ///< parallel to iterates
    std::vector<double> error_history;   ///< ||u(n) - u*||_inf, when a reference is given
    /// error_history[n+1] / error_history[n]; empty where the denominator is at roundoff level.
    std::vector<std::optional<double>> contraction_ratios;
    std::optional<int> converged_at;
    std::vector<int> negative_steps;
    PowerVector final_u;
    int steps = 0;
};

class IterationError : public Error {
public:
    IterationError(ErrorKind kind, const std::string& what, IterationTrace trace)
        : Error(kind, what), trace_(std::move(trace)) {}

    [[nodiscard]] const IterationTrace& trace() const noexcept { return trace_; }

private:
    IterationTrace trace_;
};

/// Player update from locally measured quantities.
[[nodiscard]] inline double player_update(double price_ratio, double a, double measured_osnr, double gamma_ii,
                                          double u_i) {
    return price_ratio - (1.0 / a) * (1.0 / measured_osnr - gamma_ii) * u_i;
}

[[nodiscard]] inline double seeker_update(double target, double measured_osnr, double gamma_ii, double u_i) {
    return target / (1.0 - target * gamma_ii) * (1.0 / measured_osnr - gamma_ii) * u_i;
}

/// Next power of channel i given the current power vector.
[[nodiscard]] inline double update_channel(std::size_t i, const PowerVector& u, const SystemMatrix& sys,
                                           const ServicePartition& partition) {
    const auto k = detail::idx(i);
    const double gii = sys.gamma(k, k);
    if (u(k) == 0.0) {
        // Zero power has zero OSNR; the update depends only on X_-i.
        const double x = interference(u, sys, i);
        if (partition.is_player(i)) {
            const PlayerParams& p = partition.player(i);
            return p.price_ratio() - x / p.a;
        }
        const double g = partition.seeker(i).gamma;
        if (1.0 - g * gii == 0.0) throw ChannelError(ErrorKind::Singular, i, "seeker update: 1 - gamma Gamma_ii = 0");
        return g / (1.0 - g * gii) * x;
    }
    const double measured = osnr(u, sys, i);
    if (partition.is_player(i)) {
        const PlayerParams& p = partition.player(i);
        return player_update(p.price_ratio(), p.a, measured, gii, u(k));
    }
    const double g = partition.seeker(i).gamma;
    if (1.0 - g * gii == 0.0) throw ChannelError(ErrorKind::Singular, i, "seeker update: 1 - gamma Gamma_ii = 0");
    return seeker_update(g, measured, gii, u(k));
}

/// One synchronous (Jacobi) step.
[[nodiscard]] inline PowerVector step(const PowerVector& u, const SystemMatrix& sys,
                                      const ServicePartition& partition) {
    if (u.size() != detail::idx(sys.size()) || partition.size() != sys.size())
        throw Error(ErrorKind::Dimension, "step: dimension mismatch");
    PowerVector next(u.size());
    for (std::size_t i = 0; i < sys.size(); ++i) next(detail::idx(i)) = update_channel(i, u, sys, partition);
    return next;
}

/// sigma = max( max_players sum_{j!=i} Gamma_ij / a_i,
///              max_seekers gamma_i sum_{j!=i} Gamma_ij / |1 - gamma_i Gamma_ii| )
[[nodiscard]] inline double convergence_rate(const SystemMatrix& sys, const ServicePartition& partition) {
    if (partition.size() != sys.size()) throw Error(ErrorKind::Dimension, "convergence_rate: dimension mismatch");
    double sigma = 0.0;
    for (std::size_t i = 0; i < sys.size(); ++i) {
        const auto k = detail::idx(i);
        const double off = sys.gamma.row(k).sum() - sys.gamma(k, k);
        if (partition.is_player(i)) {
            const double a = partition.player(i).a;
            if (a == 0.0) throw ChannelError(ErrorKind::Singular, i, "convergence_rate: a_i = 0");
            sigma = std::max(sigma, off / std::abs(a));
        } else {
            const double g = partition.seeker(i).gamma;
            const double denom = 1.0 - g * sys.gamma(k, k);
            if (denom == 0.0) throw ChannelError(ErrorKind::Singular, i, "convergence_rate: 1 - gamma Gamma_ii = 0");
            sigma = std::max(sigma, g * off / std::abs(denom));
        }
    }
    return sigma;
}

/// Player-shaped parameters under which the player update coincides with the
/// seeker update. a is negative for realistic targets, so this is an algebraic
/// identity, not a valid game parameter set.
struct EquivalentPlayer {
    double price_ratio = 0.0;
    double a = 0.0;
};

[[nodiscard]] inline EquivalentPlayer seeker_equivalence_params(double gamma, double gamma_ii) {
    if (!(gamma > 0.0)) throw Error(ErrorKind::Domain, "seeker_equivalence_params: gamma must be > 0");
    return {0.0, gamma_ii - 1.0 / gamma};
}

namespace detail {

inline Vector osnr_db_or_nan(const PowerVector& u, const SystemMatrix& sys) {
    Vector out(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        const double denom = noise_floor(u, sys, static_cast<std::size_t>(i));
        const double ratio = denom > 0.0 ? u(i) / denom : 0.0;
        out(i) = ratio > 0.0 ? 10.0 * std::log10(ratio) : std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

}  // namespace detail

inline constexpr double divergence_threshold_mW = 1e12;

/// Iterate until successive iterates differ by at most tol in the infinity norm.
[[nodiscard]] inline IterationTrace run(const IterationConfig& config, const SystemMatrix& sys,
                                        const ServicePartition& partition,
                                        const std::optional<PowerVector>& reference = std::nullopt) {
    if (!(config.tol > 0.0)) throw Error(ErrorKind::Validation, "iteration: tol must be > 0");
    if (config.max_iter < 1) throw Error(ErrorKind::Validation, "iteration: max_iter must be >= 1");
    if (config.u0.size() != detail::idx(sys.size()))
        throw Error(ErrorKind::Dimension, "iteration: u0 length does not match system size");
    if (reference && reference->size() != config.u0.size())
        throw Error(ErrorKind::Dimension, "iteration: reference length does not match system size");

    IterationTrace trace;
    auto record = [&](const PowerVector& u, int n) {
        if (config.record_trace || n == 0) {
            trace.iterates.push_back(u);
            trace.osnr_db_history.push_back(detail::osnr_db_or_nan(u, sys));
        } else {
            trace.iterates.back() = u;
            trace.osnr_db_history.back() = detail::osnr_db_or_nan(u, sys);
        }
        if (reference) trace.error_history.push_back((u - *reference).cwiseAbs().maxCoeff());
        if ((u.array() < 0.0).any()) trace.negative_steps.push_back(n);
    };

    PowerVector u = config.u0;
    record(u, 0);
    if (config.strict_nonneg && !trace.negative_steps.empty())
        throw IterationError(ErrorKind::Domain, "iteration: negative initial power (strict mode)", trace);
    for (int n = 1; n <= config.max_iter; ++n) {
        PowerVector next = step(u, sys, partition);
        trace.steps = n;
        if (!next.allFinite() || next.cwiseAbs().maxCoeff() > divergence_threshold_mW) {
            trace.final_u = next;
            throw IterationError(ErrorKind::Divergence,
                                 "iteration diverged at step " + std::to_string(n) + " (||u||_inf > 1e12 mW)",
                                 std::move(trace));
        }
        const double moved = (next - u).cwiseAbs().maxCoeff();
        u = std::move(next);
        record(u, n);
        if (config.strict_nonneg && !trace.negative_steps.empty() && trace.negative_steps.back() == n) {
            trace.final_u = u;
            throw IterationError(ErrorKind::Domain,
                                 "iteration: negative power at step " + std::to_string(n) + " (strict mode)",
                                 std::move(trace));
        }
        if (moved <= config.tol) {
            trace.converged_at = n;
            break;
        }
    }
    trace.final_u = u;

    constexpr double floor = 10.0 * std::numeric_limits<double>::epsilon();
    for (std::size_t n = 0; n + 1 < trace.error_history.size(); ++n) {
        const double e = trace.error_history[n];
        trace.contraction_ratios.push_back(e > floor ? std::optional<double>(trace.error_history[n + 1] / e)
                                                     : std::nullopt);
    }
    if (!trace.converged_at)
        throw IterationError(ErrorKind::NonConvergence,
                             "iteration did not converge in " + std::to_string(config.max_iter) + " steps",
                             std::move(trace));
    return trace;
}

}  // namespace osnr
