#pragma once

#include <string>
#include <vector>

#include "lqpc/linalg.hpp"

namespace lqpc {

struct Unstabilizable : NumericsError {
    using NumericsError::NumericsError;
};

// x_{t+1} = A x_t + B u_t + w_t,  y_t = C x_t + v_t,
// w ~ N(0, Q), v ~ N(0, R).
struct PlantModel {
    Matrix A, B, C, Q, R;

    Eigen::Index n() const { return A.rows(); }
    Eigen::Index p() const { return B.cols(); }
    Eigen::Index m() const { return C.rows(); }

    void check_dims() const {
        if (A.rows() != A.cols()) throw DimensionError("plant: A must be square");
        if (B.rows() != A.rows()) throw DimensionError("plant: B row count");
        if (C.cols() != A.rows()) throw DimensionError("plant: C column count");
        if (Q.rows() != A.rows() || Q.cols() != A.rows()) throw DimensionError("plant: Q dims");
        if (R.rows() != C.rows() || R.cols() != C.rows()) throw DimensionError("plant: R dims");
    }
};

struct CostWeights {
    Matrix Qc, Rc;
};

struct LqgGain {
    Matrix K;           // p x n
    Matrix closed_loop; // A - B K
};

inline LqgGain lqr_gain(const PlantModel& plant, const CostWeights& weights) {
    plant.check_dims();
    const Matrix P = solve_dare(plant.A.transpose(), plant.B, weights.Qc, weights.Rc);
    const Matrix inner = symmetrized(weights.Rc + plant.B.transpose() * P * plant.B);
    LqgGain g;
    g.K = inner.ldlt().solve(plant.B.transpose() * P * plant.A);
    g.closed_loop = plant.A - plant.B * g.K;
    if (spectral_radius(g.closed_loop) >= 1.0)
        throw Unstabilizable("lqr_gain: closed loop not stable");
    return g;
}

enum class Severity { Error, Warning };

struct Finding {
    std::string check;
    bool passed;
    Severity severity;
    std::string detail;
};

namespace detail {

inline bool symmetric_within(const Matrix& m, double tol) {
    return max_abs(m - m.transpose()) <= tol * (1.0 + max_abs(m));
}

inline bool is_psd(const Matrix& m) {
    if (!symmetric_within(m, 1e-10)) return false;
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() >= -1e-10 * (1.0 + max_abs(m));
}

inline bool is_pd(const Matrix& m) {
    if (!symmetric_within(m, 1e-10)) return false;
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() > 1e-12 * (1.0 + max_abs(m));
}

// PBH test at every eigenvalue of A with modulus >= 1.
// Columns mode: rank [A - lambda I, M] (stabilizability);
// rows mode: rank [A - lambda I; M] (detectability).
inline bool pbh_full_rank(const Matrix& a, const Matrix& m, bool stack_rows) {
    const auto n = a.rows();
    Eigen::EigenSolver<Matrix> es(a);
    for (Eigen::Index k = 0; k < n; ++k) {
        const std::complex<double> lambda = es.eigenvalues()(k);
        if (std::abs(lambda) < 1.0) continue;
        Eigen::MatrixXcd pencil;
        const Eigen::MatrixXcd ami =
            a.cast<std::complex<double>>() - lambda * Eigen::MatrixXcd::Identity(n, n);
        if (stack_rows) {
            pencil.resize(n + m.rows(), n);
            pencil.topRows(n) = ami;
            pencil.bottomRows(m.rows()) = m.cast<std::complex<double>>();
        } else {
            pencil.resize(n, n + m.cols());
            pencil.leftCols(n) = ami;
            pencil.rightCols(m.cols()) = m.cast<std::complex<double>>();
        }
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(pencil);
        const auto& sv = svd.singularValues();
        if (sv(n - 1) <= 1e-10 * sv(0)) return false;
    }
    return true;
}

}  // namespace detail

// Model validity checks behind the ergodicity and gain-synthesis
// preconditions.  Findings carry severity instead of throwing.
inline std::vector<Finding> validate_model(const PlantModel& plant, const CostWeights& weights) {
    std::vector<Finding> out;
    auto add = [&out](const std::string& check, bool ok, Severity sev, const std::string& why) {
        out.push_back({check, ok, sev, ok ? "" : why});
    };

    bool dims_ok = true;
    try {
        plant.check_dims();
        if (weights.Qc.rows() != plant.n() || weights.Qc.cols() != plant.n()) dims_ok = false;
        if (weights.Rc.rows() != plant.p() || weights.Rc.cols() != plant.p()) dims_ok = false;
    } catch (const DimensionError&) {
        dims_ok = false;
    }
    add("dimensions", dims_ok, Severity::Error, "matrix dimensions inconsistent");
    if (!dims_ok) return out;

    add("Q psd", detail::is_psd(plant.Q), Severity::Error, "Q not symmetric PSD");
    add("R>0", detail::is_pd(plant.R), Severity::Error, "R>0 violated");
    add("Qc psd", detail::is_psd(weights.Qc), Severity::Error, "Qc not symmetric PSD");
    add("Rc>0", detail::is_pd(weights.Rc), Severity::Error, "Rc>0 violated");
    add("[A,Qc] detectable", detail::pbh_full_rank(plant.A, weights.Qc, /*stack_rows=*/true),
        Severity::Error, "[A,Qc] detectable violated");
    add("[A,Q] stabilizable", detail::pbh_full_rank(plant.A, plant.Q, /*stack_rows=*/false),
        Severity::Error, "[A,Q] stabilizable violated");
    add("(A,B) stabilizable", detail::pbh_full_rank(plant.A, plant.B, /*stack_rows=*/false),
        Severity::Error, "(A,B) stabilizable violated");
    add("(A,C) detectable", detail::pbh_full_rank(plant.A, plant.C, /*stack_rows=*/true),
        Severity::Warning, "(A,C) detectable violated");
    return out;
}

inline bool all_passed(const std::vector<Finding>& findings) {
    for (const auto& f : findings)
        if (!f.passed && f.severity == Severity::Error) return false;
    return true;
}

}  // namespace lqpc
