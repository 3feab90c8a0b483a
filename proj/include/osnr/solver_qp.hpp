#pragma once

// Empty-feasible-set fallback: the closest point between the player
// equilibrium set and the seeker constraint set,
//
//     min_u ||Gamma~ u - b~||_2   s.t.   Gamma^ u >= b^,
//
// solved through its Lagrangian dual with nonnegative multipliers.
//
// The quadratic is written as 1/2 u'Hu + d'u + b~'b~ with H = 2 Gamma~'Gamma~
// and d = -2 Gamma~'b~, so it equals the squared residual exactly. H is
// singular whenever m < N, so the primal is recovered with the Moore-Penrose
// pseudoinverse H+, which selects the minimum-norm minimizer and agrees with
// (H'H)^{-1}H' whenever H has full column rank.
//
// The H+ dual is the true Lagrangian dual only when the constraint rows lie in
// range(H); otherwise the Lagrangian is unbounded along null(Gamma~). In that
// case solve_ds2 runs a proximal-point outer loop on 1/2 u'(H + rho I)u, whose
// duals are strictly concave and go through the same projected-gradient solver.

#include <osnr/errors.hpp>
#include <osnr/model.hpp>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

namespace osnr {

struct QpProblem {
    Matrix H;           ///< N x N, symmetric PSD
    Vector d;           ///< N
    double constant = 0.0;
    Matrix A;           ///< n x N constraint rows (Gamma^)
    Vector b;           ///< n (b^)
    Matrix H_pinv;
    Matrix D;           ///< -A H+ A', symmetric NSD
    Vector c;           ///< b + A H+ d
    /// Rows of A lie in range(H): the H+ dual is exact.
    bool constraints_in_range = false;
};

struct KktResiduals {
    double stationarity_residual = 0.0;         ///< ||H u + d - A' mu||_inf
    double primal_feasibility_violation = 0.0;  ///< max(0, max(b - A u))
    double complementary_slackness = 0.0;       ///< |mu'(A u - b)|
    Vector complementarity;                     ///< |mu_i (A u - b)_i|
};

struct QpResult {
    Vector mu;
    PowerVector u;
    double objective = 0.0;  ///< ||Gamma~ u - b~||_2
    KktResiduals kkt;
    int dual_iterations = 0;
    int outer_iterations = 0;
    bool proximal = false;
};

struct DualOptions {
    double tol = 1e-8;
    int max_iter = 10000;
    bool record_objective = false;
    std::optional<Vector> mu0;
};

struct DualSolution {
    Vector mu;
    int iterations = 0;
    double step = 0.0;
    double stationarity = 0.0;
    std::vector<double> objective_history;
};

struct QpOptions {
    DualOptions dual{1e-12, 100000, false, std::nullopt};
    double outer_tol = 1e-11;
    int max_outer = 20000;
};

class DualNonConvergence : public Error {
public:
    DualNonConvergence(const std::string& what, Vector last)
        : Error(ErrorKind::NonConvergence, what), last_(std::move(last)) {}

    [[nodiscard]] const Vector& last_iterate() const noexcept { return last_; }

private:
    Vector last_;
};

/// Moore-Penrose pseudoinverse; singular values below rtol * sigma_max are zero.
[[nodiscard]] inline Matrix pseudoinverse(const Matrix& m, double rtol = 1e-10) {
    if (m.size() == 0) return Matrix::Zero(m.cols(), m.rows());
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sigma = svd.singularValues();
    const double cutoff = rtol * (sigma.size() ? sigma(0) : 0.0);
    Vector inv_sigma = Vector::Zero(sigma.size());
    for (Eigen::Index k = 0; k < sigma.size(); ++k)
        if (sigma(k) > cutoff && sigma(k) > 0.0) inv_sigma(k) = 1.0 / sigma(k);
    return svd.matrixV() * inv_sigma.asDiagonal() * svd.matrixU().transpose();
}

[[nodiscard]] inline QpProblem make_qp(Matrix H, Vector d, double constant, Matrix A, Vector b) {
    if (H.rows() != H.cols() || H.rows() != d.size() || A.cols() != H.cols() || A.rows() != b.size())
        throw Error(ErrorKind::Dimension, "make_qp: inconsistent dimensions");
    QpProblem qp;
    qp.H = 0.5 * (H + H.transpose());
    qp.d = std::move(d);
    qp.constant = constant;
    qp.A = std::move(A);
    qp.b = std::move(b);
    qp.H_pinv = pseudoinverse(qp.H);
    qp.D = -(qp.A * qp.H_pinv * qp.A.transpose());
    qp.D = 0.5 * (qp.D + qp.D.transpose());
    qp.c = qp.b + qp.A * qp.H_pinv * qp.d;
    const Matrix off_range = qp.A.transpose() - qp.H * qp.H_pinv * qp.A.transpose();
    const double scale = std::max(1.0, qp.A.size() ? qp.A.cwiseAbs().maxCoeff() : 0.0);
    qp.constraints_in_range = off_range.size() == 0 || off_range.cwiseAbs().maxCoeff() <= 1e-9 * scale;
    return qp;
}

[[nodiscard]] inline QpProblem build_qp(const StackedSystem& stack) {
    if (stack.player_count() == 0 || stack.seeker_count() == 0)
        throw Error(ErrorKind::Usage, "build_qp needs at least one player and one seeker");
    const Matrix& gt = stack.gamma_tilde;
    return make_qp(2.0 * gt.transpose() * gt, -2.0 * gt.transpose() * stack.b_tilde,
                   stack.b_tilde.squaredNorm(), stack.gamma_hat, stack.b_hat);
}

/// Dual function 1/2 mu'D mu + c'mu - 1/2 d'H+ d + constant, in the units of
/// the squared primal objective.
[[nodiscard]] inline double dual_objective(const QpProblem& qp, const Vector& mu) {
    return 0.5 * mu.dot(qp.D * mu) + qp.c.dot(mu) - 0.5 * qp.d.dot(qp.H_pinv * qp.d) + qp.constant;
}

/// 1/2 u'Hu + d'u + constant.
[[nodiscard]] inline double primal_objective(const QpProblem& qp, const Vector& u) {
    return 0.5 * u.dot(qp.H * u) + qp.d.dot(u) + qp.constant;
}

/// Projected gradient ascent on the dual over mu >= 0, with backtracking.
[[nodiscard]] inline DualSolution solve_dual(const QpProblem& qp, const DualOptions& opts = {}) {
    const auto n = qp.D.rows();
    DualSolution out;
    out.mu = opts.mu0 ? opts.mu0->cwiseMax(0.0) : Vector(Vector::Zero(n));
    if (n == 0) return out;

    const double lipschitz = Eigen::SelfAdjointEigenSolver<Matrix>(-qp.D, Eigen::EigenvaluesOnly)
                                 .eigenvalues()
                                 .cwiseAbs()
                                 .maxCoeff();
    if (lipschitz == 0.0) {
        if ((qp.c.array() > 0.0).any())
            throw DualNonConvergence("dual is unbounded: seeker constraints are inconsistent", out.mu);
        out.mu.setZero();
        return out;
    }
    double step = 1.0 / lipschitz;
    auto value = [&](const Vector& mu) { return 0.5 * mu.dot(qp.D * mu) + qp.c.dot(mu); };

    double current = value(out.mu);
    if (opts.record_objective) out.objective_history.push_back(dual_objective(qp, out.mu));
    for (int it = 0; it < opts.max_iter; ++it) {
        const Vector grad = qp.D * out.mu + qp.c;
        out.stationarity = (out.mu - (out.mu + step * grad).cwiseMax(0.0)).cwiseAbs().maxCoeff();
        out.iterations = it;
        out.step = step;
        if (out.stationarity <= opts.tol) return out;

        Vector next;
        double next_value = 0.0;
        for (int halving = 0; halving < 60; ++halving) {
            next = (out.mu + step * grad).cwiseMax(0.0);
            const Vector delta = next - out.mu;
            next_value = value(next);
            if (next_value >= current + grad.dot(delta) - 0.5 / step * delta.squaredNorm()) break;
            step *= 0.5;
        }
        out.mu = std::move(next);
        current = next_value;
        if (opts.record_objective) out.objective_history.push_back(dual_objective(qp, out.mu));
    }
    throw DualNonConvergence("projected gradient did not reach tol " + detail::num(opts.tol) + " in " +
                                 std::to_string(opts.max_iter) + " iterations (stationarity " +
                                 detail::num(out.stationarity) + ")",
                             out.mu);
}

[[nodiscard]] inline KktResiduals evaluate_kkt(const QpProblem& qp, const Vector& u, const Vector& mu) {
    KktResiduals k;
    const Vector station = qp.H * u + qp.d - qp.A.transpose() * mu;
    k.stationarity_residual = station.size() ? station.cwiseAbs().maxCoeff() : 0.0;
    const Vector slack = qp.A * u - qp.b;
    k.primal_feasibility_violation = slack.size() ? std::max(0.0, (-slack).maxCoeff()) : 0.0;
    k.complementary_slackness = std::abs(mu.dot(slack));
    k.complementarity = mu.cwiseProduct(slack).cwiseAbs();
    return k;
}

/// u = -H+ (d - A' mu), the minimum-norm minimizer of the Lagrangian.
[[nodiscard]] inline QpResult recover_primal(const QpProblem& qp, const StackedSystem& stack, const Vector& mu) {
    if ((mu.array() < 0.0).any()) throw Error(ErrorKind::Domain, "recover_primal: multipliers must be >= 0");
    QpResult r;
    r.mu = mu;
    r.u = -qp.H_pinv * (qp.d - qp.A.transpose() * mu);
    r.objective = (stack.gamma_tilde * r.u - stack.b_tilde).norm();
    r.kkt = evaluate_kkt(qp, r.u, mu);
    return r;
}

[[nodiscard]] inline QpResult solve_ds2(const StackedSystem& stack, const QpOptions& opts = {}) {
    const QpProblem qp = build_qp(stack);
    if (qp.constraints_in_range) {
        const DualSolution dual = solve_dual(qp, opts.dual);
        QpResult r = recover_primal(qp, stack, dual.mu);
        r.dual_iterations = dual.iterations;
        return r;
    }

    const auto n = qp.H.rows();
    const double top = Eigen::SelfAdjointEigenSolver<Matrix>(qp.H, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
    const double rho = top > 0.0 ? top : 1.0;
    const Matrix H_reg = qp.H + rho * Matrix::Identity(n, n);

    QpResult r;
    r.proximal = true;
    Vector center = Vector::Zero(n);
    DualOptions inner = opts.dual;
    for (int outer = 1; outer <= opts.max_outer; ++outer) {
        const QpProblem sub = make_qp(H_reg, qp.d - rho * center, qp.constant + 0.5 * rho * center.squaredNorm(),
                                      qp.A, qp.b);
        const DualSolution dual = solve_dual(sub, inner);
        inner.mu0 = dual.mu;
        r.dual_iterations += dual.iterations;
        const Vector u = -sub.H_pinv * (sub.d - sub.A.transpose() * dual.mu);
        const double moved = (u - center).cwiseAbs().maxCoeff();
        center = u;
        r.mu = dual.mu;
        r.outer_iterations = outer;
        if (moved <= opts.outer_tol * (1.0 + u.cwiseAbs().maxCoeff())) {
            r.u = center;
            r.objective = (stack.gamma_tilde * r.u - stack.b_tilde).norm();
            r.kkt = evaluate_kkt(qp, r.u, r.mu);
            return r;
        }
    }
    throw DualNonConvergence("proximal outer loop did not converge in " + std::to_string(opts.max_outer) +
                                 " iterations",
                             r.mu);
}

}  // namespace osnr
