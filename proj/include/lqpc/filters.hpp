#pragma once

#include <optional>

#include "lqpc/codec.hpp"
#include "lqpc/plant.hpp"

namespace lqpc {

struct SingularInnovation : NumericsError {
    using NumericsError::NumericsError;
};

enum class Parity { Even, Odd };

// Time-varying Kalman recursion state.  SigmaPred is Sigma_{2k|2k-1} for the
// period-two strategies and is only advanced once per period.
struct FilterState {
    Vector x_pred;      // xhat_{t|t-1}
    Vector x_filt;      // xhat_{t|t}
    Matrix sigma_pred;  // Sigma_{t|t-1}
    Parity parity = Parity::Even;
    Vector aux_even_filt;             // xhat_{2k|2k} kept across the period
    std::optional<Vector> x_prime;    // Strategy III xhat'_{2k+1|2k}
    std::optional<Matrix> sigma_prime;

    static FilterState initial(const Vector& x0_pred, const Matrix& sigma0) {
        FilterState s;
        s.x_pred = x0_pred;
        s.x_filt = x0_pred;
        s.sigma_pred = sigma0;
        s.aux_even_filt = Vector::Zero(x0_pred.size());
        return s;
    }
};

namespace detail {

inline Matrix innovation_inverse(const Matrix& c, const Matrix& sigma, const Matrix& r, double s) {
    const Matrix inno = symmetrized(c * sigma * c.transpose() + r + s * Matrix::Identity(r.rows(), r.cols()));
    Eigen::LDLT<Matrix> ldlt(inno);
    if (ldlt.info() != Eigen::Success ||
        ldlt.vectorD().cwiseAbs().minCoeff() <= 1e-14 * std::max(1.0, max_abs(inno)))
        throw SingularInnovation("kalman: innovation covariance singular");
    return ldlt.solve(Matrix::Identity(inno.rows(), inno.cols()));
}

inline Matrix gain(const Matrix& c, const Matrix& sigma, const Matrix& r, double s) {
    return sigma * c.transpose() * innovation_inverse(c, sigma, r, s);
}

// One measurement update of the covariance: Sigma - Sigma C'(C Sigma C'+R+s)^-1 C Sigma.
inline Matrix updated_cov(const Matrix& c, const Matrix& sigma, const Matrix& r, double s) {
    const Matrix l = gain(c, sigma, r, s);
    return symmetrized(sigma - l * c * sigma);
}

}  // namespace detail

// Strategy I step: measurement update with effective noise R + S_b, control
// prediction through A - BK, covariance through A.
inline FilterState kf_step_I(const FilterState& state, double p, const PlantModel& plant,
                             const Matrix& K, double s_b) {
    if (plant.m() != 1) throw DimensionError("kf_step_I: decoded path is scalar-output");
    const Matrix& A = plant.A;
    const Matrix& C = plant.C;
    const Matrix L = detail::gain(C, state.sigma_pred, plant.R, s_b);
    FilterState next = state;
    next.x_filt = state.x_pred + L * (Vector::Constant(1, p) - C * state.x_pred);
    next.x_pred = (A - plant.B * K) * next.x_filt;
    next.sigma_pred =
        symmetrized(A * state.sigma_pred * A.transpose() -
                    A * L * C * state.sigma_pred * A.transpose() + plant.Q);
    return next;
}

// Strategy II step.  Even times update the estimate only; odd times re-update
// the even-time prediction with the refined reconstruction and advance the
// covariance two steps.
inline FilterState kf_step_II(const FilterState& state, const DecodedMeasurement& decoded,
                              const PlantModel& plant, const Matrix& K, double s_b, double s_2b) {
    if (plant.m() != 1) throw DimensionError("kf_step_II: decoded path is scalar-output");
    const bool even_call = decoded.t % 2 == 0;
    if ((state.parity == Parity::Even) != even_call) throw ParityError("kf_step_II: out of phase");
    const Matrix& A = plant.A;
    const Matrix& C = plant.C;
    FilterState next = state;
    if (even_call) {
        const Matrix L = detail::gain(C, state.sigma_pred, plant.R, s_b);
        next.x_filt = state.x_pred + L * (Vector::Constant(1, decoded.p) - C * state.x_pred);
        next.aux_even_filt = next.x_filt;
        next.parity = Parity::Odd;
    } else {
        const Matrix L = detail::gain(C, state.sigma_pred, plant.R, s_2b);
        const Vector refreshed =
            state.x_pred + L * (Vector::Constant(1, decoded.p) - C * state.x_pred);
        next.x_filt = A * refreshed - plant.B * K * state.aux_even_filt;
        next.x_pred = (A - plant.B * K) * next.x_filt;
        const Matrix A2 = A * A;
        next.sigma_pred = symmetrized(A2 * state.sigma_pred * A2.transpose() -
                                      A2 * L * C * state.sigma_pred * A2.transpose() +
                                      A * plant.Q * A.transpose() + plant.Q);
        next.parity = Parity::Even;
    }
    return next;
}

// Strategy III step; the odd call consumes both p'_{2k} and p_{2k+1}.
inline FilterState kf_step_III(const FilterState& state, const DecodedMeasurement& decoded,
                               const PlantModel& plant, const Matrix& K, double s_b, double s_br,
                               double s_bmr) {
    if (plant.m() != 1) throw DimensionError("kf_step_III: decoded path is scalar-output");
    const bool even_call = decoded.t % 2 == 0;
    if ((state.parity == Parity::Even) != even_call) throw ParityError("kf_step_III: out of phase");
    const Matrix& A = plant.A;
    const Matrix& C = plant.C;
    FilterState next = state;
    if (even_call) {
        const Matrix L = detail::gain(C, state.sigma_pred, plant.R, s_b);
        next.x_filt = state.x_pred + L * (Vector::Constant(1, decoded.p) - C * state.x_pred);
        next.aux_even_filt = next.x_filt;
        next.parity = Parity::Odd;
    } else {
        if (!decoded.p_prime) throw ParityError("kf_step_III: odd step needs p'");
        const Matrix Lp = detail::gain(C, state.sigma_pred, plant.R, s_br);
        const Vector x_prime =
            A * state.x_pred +
            A * Lp * (Vector::Constant(1, *decoded.p_prime) - C * state.x_pred) -
            plant.B * K * state.aux_even_filt;
        const Matrix sigma_prime = symmetrized(
            A * detail::updated_cov(C, state.sigma_pred, plant.R, s_br) * A.transpose() + plant.Q);
        const Matrix L2 = detail::gain(C, sigma_prime, plant.R, s_bmr);
        next.x_filt = x_prime + L2 * (Vector::Constant(1, decoded.p) - C * x_prime);
        next.x_pred = (A - plant.B * K) * next.x_filt;
        next.sigma_pred =
            symmetrized(A * detail::updated_cov(C, sigma_prime, plant.R, s_bmr) * A.transpose() +
                        plant.Q);
        next.x_prime = x_prime;
        next.sigma_prime = sigma_prime;
        next.parity = Parity::Even;
    }
    return next;
}

// Steady-state prediction covariance, filtered covariances and gains.
struct SteadyStateGains {
    Matrix sigma_pred_inf;   // Sigma^{p,inf}
    Matrix sigma_filt_even;  // Sigma^{inf} at even times (Strategy I: the only one)
    Matrix sigma_filt_odd;
    Matrix L_even;  // Strategy I: the single gain
    Matrix L_odd;   // II: odd gain; III: L_odd2 (the b-r update)
    Matrix L_odd1;  // III only: the b+r refinement gain
    // Strategy III even-time filtered covariance evaluated with S_{b+r}
    // instead of S_b; the two variants coexist in the source material.
    std::optional<Matrix> sigma_filt_even_alt;
};

inline double s_even(const StrategyConfig& cfg) { return noise_covariance(cfg.bits, cfg.bound); }

inline SteadyStateGains steady_state(const PlantModel& plant, const StrategyConfig& cfg) {
    cfg.check();
    const Matrix& A = plant.A;
    const Matrix& C = plant.C;
    const double s_b = noise_covariance(cfg.bits, cfg.bound);
    SteadyStateGains g;
    switch (cfg.kind) {
        case StrategyKind::I: {
            g.sigma_pred_inf = solve_dare(A, C.transpose(), plant.Q, plant.R + s_b * Matrix::Identity(plant.m(), plant.m()));
            g.L_even = detail::gain(C, g.sigma_pred_inf, plant.R, s_b);
            g.sigma_filt_even = detail::updated_cov(C, g.sigma_pred_inf, plant.R, s_b);
            g.sigma_filt_odd = g.sigma_filt_even;
            g.L_odd = g.L_even;
            break;
        }
        case StrategyKind::II: {
            const double s_2b = noise_covariance(2 * cfg.bits, cfg.bound);
            const Matrix A2 = A * A;
            g.sigma_pred_inf =
                solve_dare(A2, C.transpose(), A * plant.Q * A.transpose() + plant.Q,
                           plant.R + s_2b * Matrix::Identity(plant.m(), plant.m()));
            g.L_even = detail::gain(C, g.sigma_pred_inf, plant.R, s_b);
            g.L_odd = detail::gain(C, g.sigma_pred_inf, plant.R, s_2b);
            g.sigma_filt_even = detail::updated_cov(C, g.sigma_pred_inf, plant.R, s_b);
            g.sigma_filt_odd = detail::updated_cov(C, g.sigma_pred_inf, plant.R, s_2b);
            break;
        }
        case StrategyKind::III: {
            const double s_br = noise_covariance(cfg.bits + cfg.refine, cfg.bound);
            const double s_bmr = noise_covariance(cfg.bits - cfg.refine, cfg.bound);
            const auto m = plant.m();
            const Matrix A2 = A * A;
            Matrix g1(plant.n(), 2 * m);
            g1.leftCols(m) = C.transpose();
            g1.rightCols(m) = A.transpose() * C.transpose();
            Matrix g2 = Matrix::Zero(2 * m, 2 * m);
            g2.topLeftCorner(m, m) = plant.R + s_br * Matrix::Identity(m, m);
            g2.bottomRightCorner(m, m) =
                C * plant.Q * C.transpose() + plant.R + s_bmr * Matrix::Identity(m, m);
            Matrix cross = Matrix::Zero(plant.n(), 2 * m);
            cross.rightCols(m) = A * plant.Q * C.transpose();
            g.sigma_pred_inf =
                solve_dare(DareProblem(A2, g1, A * plant.Q * A.transpose() + plant.Q, g2, cross,
                                       Matrix::Identity(plant.n(), plant.n())));
            g.L_even = detail::gain(C, g.sigma_pred_inf, plant.R, s_b);
            g.L_odd1 = detail::gain(C, g.sigma_pred_inf, plant.R, s_br);
            g.L_odd = detail::gain(C, g.sigma_pred_inf, plant.R, s_bmr);
            g.sigma_filt_even = detail::updated_cov(C, g.sigma_pred_inf, plant.R, s_b);
            g.sigma_filt_even_alt = detail::updated_cov(C, g.sigma_pred_inf, plant.R, s_br);
            g.sigma_filt_odd = detail::updated_cov(C, g.sigma_pred_inf, plant.R, s_bmr);
            break;
        }
    }
    return g;
}

}  // namespace lqpc
