#pragma once

#include <algorithm>
#include <optional>
#include <vector>

#include "lqpc/performance.hpp"

namespace lqpc {

// E[tau_esc] = 1/beta for exceedance probability beta.
inline double expected_escape_time(double beta) {
    if (!(beta > 0.0 && beta <= 1.0)) throw DomainError("expected_escape_time: beta outside (0,1]");
    return 1.0 / beta;
}

// beta = 2 Phi(-zeta / sqrt(Z)) for scalar output variance Z.
inline double escape_probability(double zeta, double Z) {
    if (!(zeta >= 0.0)) throw DomainError("escape_probability: zeta must be nonnegative");
    if (!(Z > 0.0)) throw DomainError("escape_probability: Z must be positive");
    return 2.0 * normal_cdf(-zeta / std::sqrt(Z));
}

// Spectral representation of the closed loop driving y_t.
struct ClosedLoopRealization {
    Matrix F, G, H, Jmat;
};

inline ClosedLoopRealization closed_loop_realization(const PlantModel& plant, const Matrix& K,
                                                     const Matrix& L) {
    const auto n = plant.n();
    const auto m = plant.m();
    const Matrix BK = plant.B * K;
    ClosedLoopRealization r;
    r.F.resize(2 * n, 2 * n);
    r.F << plant.A, -BK, L * plant.C * plant.A, plant.A - BK - L * plant.C * plant.A;
    r.G.resize(2 * n, n + m);
    r.G << Matrix::Identity(n, n), Matrix::Zero(n, m), L * plant.C, L;
    r.H.resize(m, 2 * n);
    r.H << plant.C, Matrix::Zero(m, n);
    r.Jmat = Matrix::Identity(m, m);
    return r;
}

struct ErgodicityFinding {
    bool passed;
    double rho;       // spectral radius of F
    bool noise_floor; // J R J' > 0
    std::string detail;
};

inline ErgodicityFinding check_ergodicity(const PlantModel& plant, const Matrix& K,
                                          const SteadyStateGains& gains) {
    const ClosedLoopRealization r = closed_loop_realization(plant, K, gains.L_even);
    ErgodicityFinding f;
    f.rho = spectral_radius(r.F);
    const Matrix jrj = symmetrized(r.Jmat * plant.R * r.Jmat.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(jrj, Eigen::EigenvaluesOnly);
    f.noise_floor = es.eigenvalues().minCoeff() > 0.0;
    f.passed = f.rho < 1.0 && f.noise_floor;
    if (!f.passed)
        f.detail = f.rho >= 1.0 ? "closed-loop F has an eigenvalue on or outside the unit circle"
                                : "J R J' > 0 violated";
    return f;
}

struct EscapeQuery {
    PlantModel plant;
    CostWeights weights;
    StrategyConfig strategy;              // bound field ignored (solved for)
    std::optional<double> target_mean_escape;  // tau > 1
    std::optional<double> escape_prob;         // beta in (0,1)
};

struct EscapeSolution {
    double zeta = 0.0;
    double beta = 0.0;
    double tau_analytic = 0.0;
    double Z = 0.0;
    double J = 0.0;  // LQ cost at the solved bound
    int iterations = 0;
    bool converged = false;
};

namespace detail {

inline Matrix full_Z(const PlantModel& plant, const CostWeights& weights,
                     const StrategyConfig& cfg, double* J_out) {
    const SteadyStateGains gains = steady_state(plant, cfg);
    const PerformanceReport rep = compute_performance(plant, weights, cfg, gains);
    if (J_out) *J_out = rep.J;
    return output_variance(rep, plant, cfg);
}

// Solve beta/2 = P(z < -zeta 1 | z ~ N(0, Z)) for zeta by Monte Carlo:
// with u = -max_i z_i the left side is P(u > zeta), so zeta is the
// (1 - beta/2) quantile of u.  A fixed seed keeps the outer fixed point
// deterministic.
inline double mvn_bound_quantile(const Matrix& Z, double beta, long samples,
                                 std::uint64_t seed) {
    const auto m = Z.rows();
    Eigen::LLT<Matrix> llt(symmetrized(Z));
    if (llt.info() != Eigen::Success) throw SingularInnerTerm("solve_zeta: Z not PD");
    const Matrix chol = llt.matrixL();
    Rng rng(seed);
    std::vector<double> u(samples);
    Vector g(m);
    for (long s = 0; s < samples; ++s) {
        for (Eigen::Index i = 0; i < m; ++i) g(i) = rng.gaussian();
        const Vector z = chol * g;
        u[s] = -z.maxCoeff();
    }
    std::sort(u.begin(), u.end());
    const double rank = (1.0 - 0.5 * beta) * (samples - 1);
    const long lo = static_cast<long>(rank);
    const double frac = rank - lo;
    const double q = lo + 1 < samples ? (1.0 - frac) * u[lo] + frac * u[lo + 1] : u[samples - 1];
    return std::max(q, 0.0);
}

}  // namespace detail

// Damped fixed-point line search for the quantizer bound: given zeta_k the
// closed-loop output covariance Z determines the next bound.  For scalar
// output zeta_{k+1} = -Phi^{-1}(beta/2) sqrt(Z); for m > 1 the update comes
// from a Monte Carlo orthant quantile with 1e6 samples.  Initialization uses
// the quantization-free covariance (bound -> 0 sends all S terms to zero).
inline EscapeSolution solve_zeta(const EscapeQuery& query) {
    if (query.target_mean_escape.has_value() == query.escape_prob.has_value())
        throw DomainError("solve_zeta: give exactly one of tau or beta");
    const double beta = query.escape_prob ? *query.escape_prob : 1.0 / *query.target_mean_escape;
    if (!(beta > 0.0 && beta < 1.0)) throw DomainError("solve_zeta: beta outside (0,1)");

    const bool scalar_out = query.plant.m() == 1;
    constexpr long kOrthantSamples = 1000000;
    constexpr std::uint64_t kOrthantSeed = 0x657363ULL;
    StrategyConfig cfg = query.strategy;
    const double q = scalar_out ? -inverse_normal_cdf(0.5 * beta) : 0.0;
    auto next_bound = [&](const Matrix& Z) {
        return scalar_out ? q * std::sqrt(Z(0, 0))
                          : detail::mvn_bound_quantile(Z, beta, kOrthantSamples, kOrthantSeed);
    };

    cfg.bound = 0.0;
    double J = 0.0;
    Matrix Z = detail::full_Z(query.plant, query.weights, cfg, &J);
    double zeta = next_bound(Z);

    EscapeSolution sol;
    constexpr int kMaxIter = 200;
    constexpr double kAlpha = 0.5;
    for (int it = 1; it <= kMaxIter; ++it) {
        cfg.bound = zeta;
        Z = detail::full_Z(query.plant, query.weights, cfg, &J);
        const double next = (1.0 - kAlpha) * zeta + kAlpha * next_bound(Z);
        const bool done = std::abs(next - zeta) <= 1e-6 * (1.0 + zeta);
        zeta = next;
        sol.iterations = it;
        if (done) {
            sol.converged = true;
            break;
        }
    }
    cfg.bound = zeta;
    Z = detail::full_Z(query.plant, query.weights, cfg, &J);
    sol.zeta = zeta;
    sol.Z = Z(0, 0);
    sol.J = J;
    sol.beta = scalar_out ? escape_probability(zeta, Z(0, 0))
                          : 2.0 * mvn_cdf_mc(Vector::Constant(query.plant.m(), -zeta), Z,
                                             kOrthantSamples, kOrthantSeed);
    sol.tau_analytic = expected_escape_time(beta);
    return sol;
}

}  // namespace lqpc
