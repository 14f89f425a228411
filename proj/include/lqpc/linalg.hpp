#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>
#include <string>

#include "lqpc/rng.hpp"

namespace lqpc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct NumericsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NonConvergence : NumericsError {
    using NumericsError::NumericsError;
};
struct SingularInnerTerm : NumericsError {
    using NumericsError::NumericsError;
};
struct UnstableM : NumericsError {
    using NumericsError::NumericsError;
};
struct DomainError : NumericsError {
    using NumericsError::NumericsError;
};
struct DimensionError : NumericsError {
    using NumericsError::NumericsError;
};

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

inline double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

inline double spectral_radius(const Matrix& m) {
    if (m.rows() != m.cols()) throw DimensionError("spectral_radius: matrix must be square");
    if (m.size() == 0) return 0.0;
    Eigen::EigenSolver<Matrix> es(m, /*computeEigenvectors=*/false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

// Fixed point of
//   Sigma = T Sigma T' + Q - (T Sigma B + S)(B' Sigma B + R)^{-1} (T Sigma B + S)'
// with an optional descriptor matrix E (scaling), i.e. E' Sigma E on the left.
// Note the convention: `transition` multiplies Sigma from the left, so the
// filter-form Riccati equation of a plant (A, C) is solved with
// transition = A, input = C'.  The control Riccati of (A, B) takes
// transition = A', input = B.
struct DareProblem {
    Matrix transition;  // n x n
    Matrix input;       // n x q
    Matrix state_cost;  // n x n, symmetric PSD
    Matrix input_cost;  // q x q, symmetric PD
    Matrix cross;       // n x q, defaults to zero
    Matrix scaling;     // n x n, defaults to identity

    DareProblem(Matrix T, Matrix B, Matrix Q, Matrix R)
        : transition(std::move(T)), input(std::move(B)), state_cost(std::move(Q)), input_cost(std::move(R)) {
        cross = Matrix::Zero(transition.rows(), input.cols());
        scaling = Matrix::Identity(transition.rows(), transition.cols());
        check_dims();
    }
    DareProblem(Matrix T, Matrix B, Matrix Q, Matrix R, Matrix S, Matrix E)
        : transition(std::move(T)),
          input(std::move(B)),
          state_cost(std::move(Q)),
          input_cost(std::move(R)),
          cross(std::move(S)),
          scaling(std::move(E)) {
        check_dims();
    }

    void check_dims() const {
        const auto n = transition.rows();
        if (transition.cols() != n) throw DimensionError("dare: transition must be square");
        if (input.rows() != n) throw DimensionError("dare: input row count mismatch");
        if (state_cost.rows() != n || state_cost.cols() != n) throw DimensionError("dare: state_cost dims");
        if (input_cost.rows() != input.cols() || input_cost.cols() != input.cols())
            throw DimensionError("dare: input_cost dims");
        if (cross.rows() != n || cross.cols() != input.cols()) throw DimensionError("dare: cross dims");
        if (scaling.rows() != n || scaling.cols() != n) throw DimensionError("dare: scaling dims");
    }
};

namespace detail {

inline Matrix riccati_map(const DareProblem& p, const Matrix& sigma) {
    const Matrix g = p.transition * sigma * p.input + p.cross;
    const Matrix inner = symmetrized(p.input.transpose() * sigma * p.input + p.input_cost);
    Eigen::LDLT<Matrix> ldlt(inner);
    if (ldlt.info() != Eigen::Success ||
        ldlt.vectorD().cwiseAbs().minCoeff() <= 1e-14 * std::max(1.0, max_abs(inner)))
        throw SingularInnerTerm("dare: inner term numerically singular");
    return symmetrized(p.transition * sigma * p.transition.transpose() + p.state_cost -
                       g * ldlt.solve(g.transpose()));
}

}  // namespace detail

// Riccati difference iteration from Sigma_0 = state_cost; step tolerance
// 1e-12, capped at 1e6 iterations.
inline Matrix solve_dare(const DareProblem& p) {
    const auto n = p.transition.rows();
    const bool identity_scaling = p.scaling.isIdentity(1e-14);
    Eigen::PartialPivLU<Matrix> elu;
    if (!identity_scaling) elu.compute(p.scaling);

    Matrix sigma = symmetrized(p.state_cost);
    constexpr long kMaxIter = 1000000;
    for (long it = 0; it < kMaxIter; ++it) {
        Matrix next = detail::riccati_map(p, sigma);
        if (!identity_scaling) {
            // E' Sigma E = f(Sigma)  =>  Sigma = E^-T f(Sigma) E^-1
            next = symmetrized(elu.solve(elu.solve(next.transpose()).transpose()));
        }
        if (!next.allFinite()) throw NonConvergence("dare: iteration diverged");
        const double delta = max_abs(next - sigma);
        sigma = next;
        if (delta <= 1e-12 * (1.0 + max_abs(sigma))) {
            Matrix resid = detail::riccati_map(p, sigma);
            if (!identity_scaling)
                resid = p.scaling.transpose() * sigma * p.scaling - resid;
            else
                resid = sigma - resid;
            if (max_abs(resid) > 1e-9 * (1.0 + max_abs(sigma)))
                throw NonConvergence("dare: residual check failed");
            return sigma;
        }
    }
    throw NonConvergence("dare: iteration cap exceeded");
    (void)n;
}

inline Matrix solve_dare(const Matrix& transition, const Matrix& input, const Matrix& state_cost,
                         const Matrix& input_cost) {
    return solve_dare(DareProblem(transition, input, state_cost, input_cost));
}

// Psi = M Psi M' + W.  Kronecker solve for dim(M) <= 20, else a squaring
// iteration (Psi <- Psi + M Psi M', M <- M^2).
inline Matrix solve_dlyap(const Matrix& m, const Matrix& w) {
    if (m.rows() != m.cols()) throw DimensionError("dlyap: M must be square");
    if (w.rows() != m.rows() || w.cols() != m.cols()) throw DimensionError("dlyap: W dims");
    const auto n = m.rows();
    if (spectral_radius(m) >= 1.0 - 1e-12) throw UnstableM("dlyap: spectral radius of M not < 1");

    Matrix psi;
    if (n <= 20) {
        Matrix lhs = Matrix::Identity(n * n, n * n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                lhs.block(i * n, j * n, n, n) -= m(i, j) * m;
        Eigen::VectorXd vecw(n * n);
        for (Eigen::Index i = 0; i < n; ++i) vecw.segment(i * n, n) = w.row(i).transpose();
        Eigen::VectorXd vecp = lhs.partialPivLu().solve(vecw);
        psi.resize(n, n);
        for (Eigen::Index i = 0; i < n; ++i) psi.row(i) = vecp.segment(i * n, n).transpose();
    } else {
        psi = symmetrized(w);
        Matrix a = m;
        for (int it = 0; it < 200; ++it) {
            Matrix next = symmetrized(psi + a * psi * a.transpose());
            a = a * a;
            const double delta = max_abs(next - psi);
            psi = next;
            if (delta <= 1e-14 * (1.0 + max_abs(psi))) break;
        }
    }
    psi = symmetrized(psi);
    if (max_abs(m * psi * m.transpose() + w - psi) > 1e-9 * (1.0 + max_abs(psi)))
        throw NonConvergence("dlyap: residual check failed");
    return psi;
}

// Standard normal CDF, absolute error well below 1e-12.
inline double normal_cdf(double x) {
    if (!std::isfinite(x)) throw DomainError("normal_cdf: non-finite argument");
    return 0.5 * std::erfc(-x * M_SQRT1_2);
}

// Inverse of normal_cdf by bisection refined with Newton steps.
inline double inverse_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("inverse_normal_cdf: p must be in (0,1)");
    double lo = -40.0, hi = 40.0;
    for (int i = 0; i < 80; ++i) {
        const double mid = 0.5 * (lo + hi);
        (normal_cdf(mid) < p ? lo : hi) = mid;
    }
    double x = 0.5 * (lo + hi);
    for (int i = 0; i < 8; ++i) {
        const double density = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
        if (density <= 0.0) break;
        const double step = (normal_cdf(x) - p) / density;
        x -= step;
        if (std::abs(step) < 1e-15 * (1.0 + std::abs(x))) break;
    }
    return x;
}

// Monte Carlo estimate of P(z < point componentwise), z ~ N(0, cov).
// Used for the multivariate escape query; the scalar case has the closed form.
inline double mvn_cdf_mc(const Vector& point, const Matrix& cov, long samples = 1000000,
                         std::uint64_t seed = 0x6d766e63ULL) {
    const auto m = point.size();
    if (cov.rows() != m || cov.cols() != m) throw DimensionError("mvn_cdf_mc: cov dims");
    Eigen::LLT<Matrix> llt(symmetrized(cov));
    if (llt.info() != Eigen::Success) throw SingularInnerTerm("mvn_cdf_mc: cov not PD");
    const Matrix chol = llt.matrixL();
    Rng rng(seed);
    Vector g(m);
    long hits = 0;
    for (long s = 0; s < samples; ++s) {
        for (Eigen::Index i = 0; i < m; ++i) g(i) = rng.gaussian();
        const Vector z = chol * g;
        bool inside = true;
        for (Eigen::Index i = 0; i < m; ++i)
            if (!(z(i) < point(i))) {
                inside = false;
                break;
            }
        hits += inside;
    }
    return static_cast<double>(hits) / static_cast<double>(samples);
}

}  // namespace lqpc
