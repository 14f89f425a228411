#pragma once

#include "lqpc/filters.hpp"

namespace lqpc {

struct UnstableLift : NumericsError {
    using NumericsError::NumericsError;
};

// Lifted (period-two) closed-loop realization: state' = M state + N noise,
// cov(noise) = P.  For Strategy I the "lift" is the ordinary one-step loop.
struct TwoStepRealization {
    Matrix M;
    Matrix N;
    Matrix P;
    Eigen::Index block_dim;  // n, for extracting n x n blocks of Psi
    double rho;              // spectral radius of M
    bool noise_cov_psd;      // whether sym(N P N') passed the PSD check
};

struct PerformanceReport {
    Matrix psi;  // stationary joint second moment of the lifted state
    double J;
    StrategyKind strategy;
    Eigen::Index block_dim;

    Matrix block(int i, int j) const {
        return psi.block(i * block_dim, j * block_dim, block_dim, block_dim);
    }
};

namespace detail {

inline Matrix hstack(std::initializer_list<Matrix> ms) {
    Eigen::Index rows = ms.begin()->rows(), cols = 0;
    for (const auto& m : ms) cols += m.cols();
    Matrix out(rows, cols);
    Eigen::Index at = 0;
    for (const auto& m : ms) {
        out.middleCols(at, m.cols()) = m;
        at += m.cols();
    }
    return out;
}

inline bool psd_within(const Matrix& m, double tol_scale) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() >= -tol_scale * (1.0 + max_abs(m));
}

}  // namespace detail

inline TwoStepRealization build_realization(const PlantModel& plant, const Matrix& K,
                                            const SteadyStateGains& gains,
                                            const StrategyConfig& cfg) {
    cfg.check();
    plant.check_dims();
    const auto n = plant.n();
    const auto m = plant.m();
    const Matrix& A = plant.A;
    const Matrix BK = plant.B * K;
    const Matrix& C = plant.C;
    const Matrix In = Matrix::Identity(n, n);
    const Matrix Znn = Matrix::Zero(n, n);
    const Matrix Znm = Matrix::Zero(n, m);
    const double s_b = noise_covariance(cfg.bits, cfg.bound);
    const Matrix Im = Matrix::Identity(m, m);

    TwoStepRealization out;
    out.block_dim = n;

    if (cfg.kind == StrategyKind::I) {
        const Matrix& L = gains.L_even;
        out.M = Matrix(2 * n, 2 * n);
        out.M << A, -BK, L * C * A, (In - L * C) * A - BK;
        out.N = Matrix(2 * n, n + 2 * m);
        out.N << In, Znm, Znm, L * C, L, L;
        out.P = Matrix::Zero(n + 2 * m, n + 2 * m);
        out.P.topLeftCorner(n, n) = plant.Q;
        out.P.block(n, n, m, m) = plant.R;
        out.P.bottomRightCorner(m, m) = s_b * Im;
    } else if (cfg.kind == StrategyKind::II) {
        const double s_2b = noise_covariance(2 * cfg.bits, cfg.bound);
        const Matrix& Le = gains.L_even;
        const Matrix& Lo = gains.L_odd;
        Matrix F1(2 * n, 4 * n), F2(3 * n, 2 * n), F3(3 * n, 3 * n), F4(4 * n, 3 * n);
        F1 << Znn, Znn, Znn, A - BK,
              Znn, Znn, A, -BK;
        F2 << In, Znn,
              Znn, In,
              In - Le * C, Le * C;
        F3 << Znn, In, Znn,
              Znn, Znn, In,
              In - Lo * C, Lo * C, Znn;
        F4 << In, Znn, Znn,
              Znn, In, Znn,
              A, -BK, Znn,
              Znn, -BK, A;
        Matrix G1(2 * n, n), G2(3 * n, m), G3(3 * n, m), G4(4 * n, n);
        G1 << Znn, In;
        G2 << Znm, Znm, Le;
        G3 << Znm, Znm, Lo;
        G4 << Znn, Znn, In, Znn;
        out.M = F4 * F3 * F2 * F1;
        // Columns follow the noise order of P2:
        // [w_{2k-1}, w_{2k}, v+q at even, v+q at odd].
        out.N = detail::hstack({F4 * F3 * F2 * G1, G4, F4 * F3 * G2, F4 * G3});
        out.P = Matrix::Zero(2 * n + 2 * m, 2 * n + 2 * m);
        out.P.topLeftCorner(n, n) = plant.Q;
        out.P.block(n, n, n, n) = plant.Q;
        out.P.block(2 * n, 2 * n, m, m) = plant.R + s_b * Im;
        out.P.block(2 * n, 2 * n + m, m, m) = plant.R + s_2b * Im;
        out.P.block(2 * n + m, 2 * n, m, m) = plant.R + s_2b * Im;
        out.P.block(2 * n + m, 2 * n + m, m, m) = plant.R + s_2b * Im;
    } else {
        const double s_br = noise_covariance(cfg.bits + cfg.refine, cfg.bound);
        const double s_bmr = noise_covariance(cfg.bits - cfg.refine, cfg.bound);
        const Matrix& Le = gains.L_even;
        const Matrix& Lo1 = gains.L_odd1;
        const Matrix& Lo2 = gains.L_odd;
        Matrix F1(2 * n, 4 * n), F2(3 * n, 2 * n), F3(4 * n, 3 * n), F4(4 * n, 4 * n);
        F1 << A, -BK, Znn, Znn,
              Znn, A - BK, Znn, Znn;
        F2 << In, Znn,
              Le * C, In - Le * C,
              Lo1 * C, In - Lo1 * C;
        F3 << A, -BK, Znn,
              Znn, Znn, In,
              In, Znn, Znn,
              Znn, In, Znn;
        F4 << In, Znn, Znn, Znn,
              Lo2 * C, (In - Lo2 * C) * A, Znn, -(In - Lo2 * C) * BK,
              Znn, Znn, In, Znn,
              Znn, Znn, Znn, In;
        Matrix G1(2 * n, n), G2(3 * n, 2 * m), G3(4 * n, n), G4(4 * n, m);
        G1 << In, Znn;
        G2 << Znm, Znm,
              Le, Znm,
              Znm, Lo1;
        G3 << In, Znn, Znn, Znn;
        G4 << Znm, Lo2, Znm, Znm;
        out.M = F4 * F3 * F2 * F1;
        // Noise order of P3: [w_{2k-1}, w_{2k}, v+q_b(2k), v+q_{b+r}(2k), v+q_{b-r}(2k+1)].
        out.N = detail::hstack({F4 * F3 * F2 * G1, F4 * G3, F4 * F3 * G2, G4});
        out.P = Matrix::Zero(2 * n + 3 * m, 2 * n + 3 * m);
        out.P.topLeftCorner(n, n) = plant.Q;
        out.P.block(n, n, n, n) = plant.Q;
        const auto i3 = 2 * n, i4 = 2 * n + m, i5 = 2 * n + 2 * m;
        out.P.block(i3, i3, m, m) = plant.R + s_b * Im;
        out.P.block(i3, i4, m, m) = plant.R + s_br * Im;
        out.P.block(i4, i3, m, m) = plant.R + s_br * Im;
        out.P.block(i4, i4, m, m) = plant.R + s_br * Im;
        out.P.block(i5, i5, m, m) = plant.R + s_bmr * Im;
    }

    out.rho = spectral_radius(out.M);
    if (out.rho >= 1.0) throw UnstableLift("build_realization: lifted loop unstable");
    out.noise_cov_psd =
        detail::psd_within(out.N * out.P * out.N.transpose(), 1e-9);
    return out;
}

inline PerformanceReport compute_performance(const PlantModel& plant, const CostWeights& weights,
                                             const StrategyConfig& cfg,
                                             const SteadyStateGains& gains) {
    const LqgGain lq = lqr_gain(plant, weights);
    const TwoStepRealization lift = build_realization(plant, lq.K, gains, cfg);
    const Matrix w = symmetrized(lift.N * lift.P * lift.N.transpose());
    PerformanceReport rep;
    rep.strategy = cfg.kind;
    rep.block_dim = lift.block_dim;
    rep.psi = solve_dlyap(lift.M, w);
    const Matrix cost_k = lq.K.transpose() * weights.Rc * lq.K;
    if (cfg.kind == StrategyKind::I) {
        rep.J = (weights.Qc * rep.block(0, 0)).trace() + (cost_k * rep.block(1, 1)).trace();
    } else {
        rep.J = 0.5 * (weights.Qc * (rep.block(0, 0) + rep.block(2, 2))).trace() +
                0.5 * (cost_k * (rep.block(1, 1) + rep.block(3, 3))).trace();
    }
    return rep;
}

// Covariance of the dithered output z_t = y_t + d_t.  The x-covariance is
// Psi(1,1) for Strategy I and the average of the even/odd state blocks for
// II/III; the dither variance is the transmit-side quantizer's step^2/12
// (averaged across the two resolutions for Strategy III).
inline Matrix output_variance(const PerformanceReport& report, const PlantModel& plant,
                              const StrategyConfig& cfg) {
    Matrix xcov;
    double dither_var = 0.0;
    if (cfg.kind == StrategyKind::I) {
        xcov = report.block(0, 0);
        dither_var = noise_covariance(cfg.bits, cfg.bound);
    } else if (cfg.kind == StrategyKind::II) {
        xcov = 0.5 * (report.block(0, 0) + report.block(2, 2));
        dither_var = noise_covariance(2 * cfg.bits, cfg.bound);
    } else {
        xcov = 0.5 * (report.block(0, 0) + report.block(2, 2));
        dither_var = 0.5 * (noise_covariance(cfg.bits + cfg.refine, cfg.bound) +
                            noise_covariance(cfg.bits - cfg.refine, cfg.bound));
    }
    return symmetrized(plant.C * xcov * plant.C.transpose()) + plant.R +
           dither_var * Matrix::Identity(plant.m(), plant.m());
}

}  // namespace lqpc
