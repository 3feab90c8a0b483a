#pragma once

// Allocation problem data: OSNR evaluation, the game player cost, and the
// partitioned linear systems
//
//     players:  Gamma~ u  = b~     (Nash equilibrium first-order conditions)
//     seekers:  Gamma^ u >= b^     (OSNR_i >= gamma_i)
//
// stacked players-first into Gamma_bar u = b_bar.

#include <osnr/errors.hpp>
#include <osnr/topology.hpp>

#include <cmath>
#include <variant>
#include <vector>

namespace osnr {

/// Channel input powers (mW). Entries may be negative; solvers flag them.
using PowerVector = Eigen::VectorXd;

struct PlayerParams {
    double alpha = 1.0;  ///< price per unit power (1/mW)
    double beta = 1.0;   ///< weight on OSNR
    double a = 1.0;      ///< channel parameter

    [[nodiscard]] double price_ratio() const { return beta / alpha; }

    void validate() const {
        if (!(alpha > 0.0)) throw Error(ErrorKind::Validation, "player: alpha must be > 0");
        if (!(beta >= 0.0)) throw Error(ErrorKind::Validation, "player: beta must be >= 0");
        if (!(a > 0.0)) throw Error(ErrorKind::Validation, "player: a must be > 0");
    }
};

struct SeekerParams {
    double gamma = 100.0;  ///< target OSNR, linear ratio

    void validate() const {
        if (!(gamma > 0.0)) throw Error(ErrorKind::Validation, "seeker: gamma must be > 0");
    }
};

using Role = std::variant<PlayerParams, SeekerParams>;

/// Per-channel role assignment. Index sets are kept in ascending channel order.
class ServicePartition {
public:
    ServicePartition() = default;

    explicit ServicePartition(std::vector<Role> roles) : roles_(std::move(roles)) {
        for (std::size_t i = 0; i < roles_.size(); ++i)
            (std::holds_alternative<PlayerParams>(roles_[i]) ? players_ : seekers_).push_back(i);
    }

    static ServicePartition all_players(std::size_t n, const PlayerParams& params) {
        return ServicePartition(std::vector<Role>(n, params));
    }
    static ServicePartition all_seekers(std::size_t n, const SeekerParams& params) {
        return ServicePartition(std::vector<Role>(n, params));
    }

    [[nodiscard]] std::size_t size() const { return roles_.size(); }
    [[nodiscard]] const std::vector<std::size_t>& players() const { return players_; }
    [[nodiscard]] const std::vector<std::size_t>& seekers() const { return seekers_; }
    [[nodiscard]] const Role& role(std::size_t i) const { return roles_.at(i); }
    [[nodiscard]] bool is_player(std::size_t i) const { return std::holds_alternative<PlayerParams>(roles_.at(i)); }
    [[nodiscard]] const PlayerParams& player(std::size_t i) const { return std::get<PlayerParams>(roles_.at(i)); }
    [[nodiscard]] const SeekerParams& seeker(std::size_t i) const { return std::get<SeekerParams>(roles_.at(i)); }

    void validate() const {
        for (std::size_t i = 0; i < roles_.size(); ++i) {
            try {
                std::visit([](const auto& p) { p.validate(); }, roles_[i]);
            } catch (const Error& e) {
                throw Error(e.kind(), "channel " + std::to_string(i + 1) + ": " + e.what());
            }
        }
    }

private:
    std::vector<Role> roles_;
    std::vector<std::size_t> players_;
    std::vector<std::size_t> seekers_;
};

struct StackedSystem {
    Matrix gamma_tilde;  ///< m x N
    Vector b_tilde;      ///< m
    Matrix gamma_hat;    ///< n x N
    Vector b_hat;        ///< n
    Matrix gamma_bar;    ///< N x N, gamma_tilde rows over gamma_hat rows
    Vector b_bar;        ///< N

    SystemMatrix system;
    ServicePartition partition;
    /// Built directly from blocks rather than from a physical Gamma; system and
    /// partition parameters are placeholders.
    bool synthetic = false;

    [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(gamma_bar.rows()); }
    [[nodiscard]] std::size_t player_count() const { return partition.players().size(); }
    [[nodiscard]] std::size_t seeker_count() const { return partition.seekers().size(); }

    /// Channel whose condition occupies row r of gamma_bar.
    [[nodiscard]] std::size_t row_channel(std::size_t r) const {
        const std::size_t m = player_count();
        return r < m ? partition.players()[r] : partition.seekers()[r - m];
    }
};

namespace detail {

inline Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

inline void check_channel(const SystemMatrix& sys, const PowerVector& u, std::size_t i) {
    if (u.size() != sys.n0.size())
        throw Error(ErrorKind::Dimension, "power vector length does not match system size");
    if (i >= sys.size()) throw Error(ErrorKind::Dimension, "channel index out of range");
}

}  // namespace detail

/// n0_i + sum_j Gamma_ij u_j, including the self term.
[[nodiscard]] inline double noise_floor(const PowerVector& u, const SystemMatrix& sys, std::size_t i) {
    detail::check_channel(sys, u, i);
    return sys.n0(detail::idx(i)) + sys.gamma.row(detail::idx(i)).dot(u);
}

/// X_{-i} = n0_i + sum_{j != i} Gamma_ij u_j.
[[nodiscard]] inline double interference(const PowerVector& u, const SystemMatrix& sys, std::size_t i) {
    detail::check_channel(sys, u, i);
    const auto k = detail::idx(i);
    return sys.n0(k) + sys.gamma.row(k).dot(u) - sys.gamma(k, k) * u(k);
}

[[nodiscard]] inline double osnr(const PowerVector& u, const SystemMatrix& sys, std::size_t i) {
    const double denominator = noise_floor(u, sys, i);
    if (!(denominator > 0.0))
        throw ChannelError(ErrorKind::Evaluation, i, "OSNR denominator is not positive");
    return u(detail::idx(i)) / denominator;
}

[[nodiscard]] inline double ratio_to_db(double ratio) {
    if (!(ratio > 0.0)) throw Error(ErrorKind::Domain, "dB conversion of a non-positive ratio");
    return 10.0 * std::log10(ratio);
}

[[nodiscard]] inline double osnr_db(const PowerVector& u, const SystemMatrix& sys, std::size_t i) {
    const double ratio = osnr(u, sys, i);
    if (!(ratio > 0.0)) throw ChannelError(ErrorKind::Domain, i, "OSNR is not positive, no dB value");
    return ratio_to_db(ratio);
}

/// J_i = alpha u_i - beta ln(1 + a u_i / X_{-i}).
[[nodiscard]] inline double player_cost(std::size_t i, const PowerVector& u, const SystemMatrix& sys,
                                        const PlayerParams& params) {
    const double x = interference(u, sys, i);
    if (!(x > 0.0)) throw ChannelError(ErrorKind::Domain, i, "player cost: X_-i is not positive");
    const double ui = u(detail::idx(i));
    const double arg = 1.0 + params.a * ui / x;
    if (!(arg > 0.0)) throw ChannelError(ErrorKind::Domain, i, "player cost: log argument is not positive");
    return params.alpha * ui - params.beta * std::log(arg);
}

[[nodiscard]] inline StackedSystem assemble(const SystemMatrix& sys, const ServicePartition& partition) {
    sys.validate();
    if (partition.size() != sys.size())
        throw Error(ErrorKind::Dimension, "partition covers " + std::to_string(partition.size()) +
                                              " channels, system has " + std::to_string(sys.size()));
    const auto n_total = detail::idx(sys.size());
    const auto& players = partition.players();
    const auto& seekers = partition.seekers();
    const auto m = detail::idx(players.size());
    const auto n = detail::idx(seekers.size());

    StackedSystem out;
    out.gamma_tilde.resize(m, n_total);
    out.b_tilde.resize(m);
    for (Eigen::Index r = 0; r < m; ++r) {
        const auto i = detail::idx(players[static_cast<std::size_t>(r)]);
        const PlayerParams& p = partition.player(static_cast<std::size_t>(i));
        out.gamma_tilde.row(r) = sys.gamma.row(i);
        out.gamma_tilde(r, i) = p.a;
        out.b_tilde(r) = p.a * p.beta / p.alpha - sys.n0(i);
    }
    out.gamma_hat.resize(n, n_total);
    out.b_hat.resize(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto i = detail::idx(seekers[static_cast<std::size_t>(r)]);
        const double g = partition.seeker(static_cast<std::size_t>(i)).gamma;
        out.gamma_hat.row(r) = -g * sys.gamma.row(i);
        out.gamma_hat(r, i) = 1.0 - g * sys.gamma(i, i);
        out.b_hat(r) = g * sys.n0(i);
    }
    out.gamma_bar.resize(n_total, n_total);
    out.gamma_bar.topRows(m) = out.gamma_tilde;
    out.gamma_bar.bottomRows(n) = out.gamma_hat;
    out.b_bar.resize(n_total);
    out.b_bar.head(m) = out.b_tilde;
    out.b_bar.tail(n) = out.b_hat;
    out.system = sys;
    out.partition = partition;
    return out;
}

/// Stacked system from arbitrary blocks, without a physical Gamma behind it.
/// Players occupy channels [0, m), seekers [m, N).
[[nodiscard]] inline StackedSystem stack_from_blocks(Matrix gamma_tilde, Vector b_tilde, Matrix gamma_hat,
                                                     Vector b_hat) {
    const auto m = gamma_tilde.rows();
    const auto n = gamma_hat.rows();
    if (gamma_tilde.cols() != m + n || gamma_hat.cols() != m + n || b_tilde.size() != m || b_hat.size() != n)
        throw Error(ErrorKind::Dimension, "stack_from_blocks: blocks must stack into a square system");
    if (!gamma_tilde.allFinite() || !gamma_hat.allFinite() || !b_tilde.allFinite() || !b_hat.allFinite())
        throw Error(ErrorKind::Validation, "stack_from_blocks: non-finite entry");
    StackedSystem out;
    std::vector<Role> roles(static_cast<std::size_t>(m), PlayerParams{});
    roles.resize(static_cast<std::size_t>(m + n), SeekerParams{});
    out.partition = ServicePartition(std::move(roles));
    out.system.gamma = Matrix::Zero(m + n, m + n);
    out.system.n0 = Vector::Zero(m + n);
    out.gamma_bar.resize(m + n, m + n);
    out.gamma_bar.topRows(m) = gamma_tilde;
    out.gamma_bar.bottomRows(n) = gamma_hat;
    out.b_bar.resize(m + n);
    out.b_bar.head(m) = b_tilde;
    out.b_bar.tail(n) = b_hat;
    out.gamma_tilde = std::move(gamma_tilde);
    out.b_tilde = std::move(b_tilde);
    out.gamma_hat = std::move(gamma_hat);
    out.b_hat = std::move(b_hat);
    out.synthetic = true;
    return out;
}

}  // namespace osnr
