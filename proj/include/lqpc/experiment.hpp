#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lqpc/simulator.hpp"

namespace lqpc {

// Experiment description: plant/cost data, strategy list, escape target or
// explicit bound, and Monte Carlo settings.
struct ExperimentConfig {
    PlantModel plant;
    CostWeights weights;
    std::vector<double> rc_values;          // Rc sweep for table mode (Rc = value * I)
    std::vector<StrategyConfig> strategies;
    std::optional<double> target_mean_escape;
    std::optional<double> explicit_bound;
    long horizon = 5000;
    long runs = 1000;
    std::uint64_t seed = 1;
    bool saturation = true;
    long burn_in = 1000;
    int threads = 0;
};

namespace detail {

inline Matrix matrix_from_json(const nlohmann::json& j, const std::string& name) {
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw ConfigError("config: " + name + " must be an array of arrays");
    const size_t rows = j.size();
    const size_t cols = j[0].size();
    Matrix m(rows, cols);
    for (size_t r = 0; r < rows; ++r) {
        if (!j[r].is_array() || j[r].size() != cols)
            throw ConfigError("config: " + name + " rows are ragged");
        for (size_t c = 0; c < cols; ++c) {
            if (!j[r][c].is_number()) throw ConfigError("config: " + name + " has a non-number");
            m(r, c) = j[r][c].get<double>();
        }
    }
    if (!m.allFinite()) throw ConfigError("config: " + name + " has non-finite entries");
    return m;
}

inline StrategyKind kind_from_string(const std::string& s) {
    if (s == "I") return StrategyKind::I;
    if (s == "II") return StrategyKind::II;
    if (s == "III") return StrategyKind::III;
    throw ConfigError("config: unknown strategy kind '" + s + "'");
}

inline std::string kind_to_string(StrategyKind k) {
    switch (k) {
        case StrategyKind::I: return "I";
        case StrategyKind::II: return "II";
        case StrategyKind::III: return "III";
    }
    return "?";
}

inline std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
    ExperimentConfig cfg;
    if (!j.contains("plant")) throw ConfigError("config: missing 'plant'");
    const auto& pj = j.at("plant");
    for (const char* f : {"A", "B", "C", "Q", "R"})
        if (!pj.contains(f)) throw ConfigError(std::string("config: plant missing '") + f + "'");
    cfg.plant.A = detail::matrix_from_json(pj.at("A"), "plant.A");
    cfg.plant.B = detail::matrix_from_json(pj.at("B"), "plant.B");
    cfg.plant.C = detail::matrix_from_json(pj.at("C"), "plant.C");
    cfg.plant.Q = detail::matrix_from_json(pj.at("Q"), "plant.Q");
    cfg.plant.R = detail::matrix_from_json(pj.at("R"), "plant.R");
    try {
        cfg.plant.check_dims();
    } catch (const DimensionError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }

    if (!j.contains("weights")) throw ConfigError("config: missing 'weights'");
    cfg.weights.Qc = detail::matrix_from_json(j.at("weights").at("Qc"), "weights.Qc");
    cfg.weights.Rc = detail::matrix_from_json(j.at("weights").at("Rc"), "weights.Rc");

    if (j.contains("rc_values")) {
        for (const auto& v : j.at("rc_values")) {
            if (!v.is_number()) throw ConfigError("config: rc_values must be numbers");
            cfg.rc_values.push_back(v.get<double>());
        }
    }

    if (!j.contains("strategies") || j.at("strategies").empty())
        throw ConfigError("config: at least one strategy required");
    for (const auto& sj : j.at("strategies")) {
        StrategyConfig sc;
        sc.kind = detail::kind_from_string(sj.at("kind").get<std::string>());
        sc.bits = sj.at("bits").get<int>();
        sc.refine = sj.value("refine", 0);
        try {
            sc.check();
        } catch (const ConfigError&) {
            throw;
        }
        cfg.strategies.push_back(sc);
    }

    if (j.contains("escape")) {
        const auto& ej = j.at("escape");
        if (ej.contains("target_mean_escape_time"))
            cfg.target_mean_escape = ej.at("target_mean_escape_time").get<double>();
        if (ej.contains("bound")) cfg.explicit_bound = ej.at("bound").get<double>();
    }
    if (cfg.target_mean_escape.has_value() == cfg.explicit_bound.has_value())
        throw ConfigError("config: give exactly one of escape.target_mean_escape_time or escape.bound");
    if (cfg.target_mean_escape && !(*cfg.target_mean_escape > 1.0))
        throw ConfigError("config: target mean escape time must exceed 1");
    if (cfg.explicit_bound && !(*cfg.explicit_bound > 0.0))
        throw ConfigError("config: explicit bound must be positive");

    if (j.contains("simulation")) {
        const auto& sj = j.at("simulation");
        cfg.horizon = sj.value("horizon", cfg.horizon);
        cfg.runs = sj.value("runs", cfg.runs);
        cfg.seed = sj.value("seed", cfg.seed);
        cfg.saturation = sj.value("saturation", cfg.saturation);
        cfg.burn_in = sj.value("burn_in", cfg.burn_in);
        cfg.threads = sj.value("threads", cfg.threads);
        if (cfg.horizon < 0 || cfg.runs < 1) throw ConfigError("config: bad simulation settings");
    }
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: JSON parse error: ") + e.what());
    }
    try {
        return parse_config(j);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: schema error: ") + e.what());
    }
}

// ---- design ----

struct DesignReport {
    LqgGain gain;
    std::vector<Finding> findings;
    bool ok;
};

inline DesignReport run_design(const ExperimentConfig& cfg) {
    DesignReport rep;
    rep.findings = validate_model(cfg.plant, cfg.weights);
    rep.ok = all_passed(rep.findings);
    if (rep.ok) rep.gain = lqr_gain(cfg.plant, cfg.weights);
    return rep;
}

// ---- table ----

struct TableRow {
    double rc = 0.0;
    double a_minus_bk = 0.0;      // scalar closed loop (n=1) or its spectral radius
    double zeta = 0.0;
    double tau_a = 0.0;
    std::optional<double> tau_emp;
    std::optional<double> censored;
    std::vector<double> costs;    // one per configured strategy
    std::string error;
};

struct TableResult {
    std::vector<TableRow> rows;
    std::vector<std::string> cost_columns;
    bool any_failed = false;
};

inline TableResult run_table(const ExperimentConfig& cfg, bool with_simulation) {
    TableResult out;
    for (const auto& sc : cfg.strategies)
        out.cost_columns.push_back("J_" + detail::kind_to_string(sc.kind));
    for (double rc : cfg.rc_values) {
        TableRow row;
        row.rc = rc;
        try {
            CostWeights w = cfg.weights;
            w.Rc = rc * Matrix::Identity(cfg.plant.p(), cfg.plant.p());
            const LqgGain lq = lqr_gain(cfg.plant, w);
            row.a_minus_bk = cfg.plant.n() == 1 ? lq.closed_loop(0, 0)
                                                : spectral_radius(lq.closed_loop);
            // The row's bound comes from the first configured strategy.
            StrategyConfig lead = cfg.strategies.front();
            if (cfg.explicit_bound) {
                row.zeta = *cfg.explicit_bound;
                lead.bound = row.zeta;
                const SteadyStateGains g0 = steady_state(cfg.plant, lead);
                const PerformanceReport rep0 = compute_performance(cfg.plant, w, lead, g0);
                const double Z = output_variance(rep0, cfg.plant, lead)(0, 0);
                row.tau_a = expected_escape_time(escape_probability(row.zeta, Z));
            } else {
                EscapeQuery q{cfg.plant, w, lead, cfg.target_mean_escape, std::nullopt};
                const EscapeSolution sol = solve_zeta(q);
                if (!sol.converged) throw NonConvergence("table: zeta search did not converge");
                row.zeta = sol.zeta;
                row.tau_a = sol.tau_analytic;
            }
            for (const auto& sc : cfg.strategies) {
                StrategyConfig s = sc;
                s.bound = row.zeta;
                const SteadyStateGains g = steady_state(cfg.plant, s);
                row.costs.push_back(compute_performance(cfg.plant, w, s, g).J);
            }
            if (with_simulation) {
                SimConfig sim;
                sim.plant = cfg.plant;
                sim.weights = w;
                sim.strategy = cfg.strategies.front();
                sim.strategy.bound = row.zeta;
                sim.horizon = cfg.horizon;
                sim.runs = cfg.runs;
                sim.base_seed = cfg.seed;
                sim.saturation_enabled = cfg.saturation;
                sim.burn_in = cfg.burn_in;
                sim.threads = cfg.threads;
                const MonteCarloSummary mc = empirical_escape_time(sim);
                row.tau_emp = mc.empirical_mean_escape;
                row.censored = mc.censored_fraction;
            }
        } catch (const std::exception& e) {
            row.error = e.what();
            out.any_failed = true;
        }
        out.rows.push_back(row);
    }
    return out;
}

inline std::string table_csv(const TableResult& res) {
    std::ostringstream os;
    os << "Rc,A_minus_BK,zeta,tau_a,tau_emp,censored_fraction";
    for (const auto& c : res.cost_columns) os << ',' << c;
    os << ",error\n";
    for (const auto& row : res.rows) {
        os << detail::fmt6(row.rc);
        if (row.error.empty()) {
            os << ',' << detail::fmt6(row.a_minus_bk) << ',' << detail::fmt6(row.zeta) << ','
               << detail::fmt6(row.tau_a) << ',';
            if (row.tau_emp) os << detail::fmt6(*row.tau_emp);
            os << ',';
            if (row.censored) os << detail::fmt6(*row.censored);
            for (double j : row.costs) os << ',' << detail::fmt6(j);
            os << ",\n";
        } else {
            os << ",,,,,";
            for (size_t i = 0; i < res.cost_columns.size(); ++i) os << ',';
            std::string msg = row.error;
            for (auto& ch : msg)
                if (ch == ',' || ch == '\n') ch = ';';
            os << ',' << msg << '\n';
        }
    }
    return os.str();
}

// ---- trace ----

struct TraceResult {
    SimTrace trace;
    double zeta = 0.0;
    StrategyConfig strategy;
    Eigen::Index n = 0;
};

inline TraceResult run_trace(const ExperimentConfig& cfg, const StrategyConfig& strategy) {
    TraceResult out;
    out.strategy = strategy;
    out.n = cfg.plant.n();
    if (cfg.explicit_bound) {
        out.zeta = *cfg.explicit_bound;
    } else {
        EscapeQuery q{cfg.plant, cfg.weights, strategy, cfg.target_mean_escape, std::nullopt};
        const EscapeSolution sol = solve_zeta(q);
        if (!sol.converged) throw NonConvergence("trace: zeta search did not converge");
        out.zeta = sol.zeta;
    }
    SimConfig sim;
    sim.plant = cfg.plant;
    sim.weights = cfg.weights;
    sim.strategy = strategy;
    sim.strategy.bound = out.zeta;
    sim.horizon = cfg.horizon;
    sim.runs = 1;
    sim.base_seed = cfg.seed;
    sim.saturation_enabled = cfg.saturation;
    sim.burn_in = cfg.burn_in;
    out.trace = run_closed_loop(sim, 0);
    return out;
}

inline std::string trace_csv(const TraceResult& res) {
    std::ostringstream os;
    os << "t,y,z,u,p,p_prime,payload,saturated";
    for (Eigen::Index i = 0; i < res.n; ++i) os << ",xhat_" << i;
    for (Eigen::Index i = 0; i < res.n; ++i) os << ",x_" << i;
    os << '\n';
    const auto& tr = res.trace;
    for (size_t t = 0; t < tr.y.size(); ++t) {
        os << t << ',' << detail::fmt6(tr.y[t]) << ',' << detail::fmt6(tr.z[t]) << ','
           << detail::fmt6(tr.u[t]) << ',' << detail::fmt6(tr.p[t]) << ',';
        if (std::isfinite(tr.p_prime[t])) os << detail::fmt6(tr.p_prime[t]);
        os << ',' << tr.payload[t] << ',';
        const bool sat =
            std::find(tr.saturation_events.begin(), tr.saturation_events.end(),
                      static_cast<long>(t)) != tr.saturation_events.end();
        os << (sat ? 1 : 0);
        for (Eigen::Index i = 0; i < res.n; ++i) os << ',' << detail::fmt6(tr.x_filt[t](i));
        for (Eigen::Index i = 0; i < res.n; ++i) os << ',' << detail::fmt6(tr.x[t](i));
        os << '\n';
    }
    return os.str();
}

// ---- escape ----

struct EscapeRow {
    StrategyConfig strategy;
    EscapeSolution solution;
    ErgodicityFinding ergodicity;
};

inline std::vector<EscapeRow> run_escape(const ExperimentConfig& cfg) {
    std::vector<EscapeRow> rows;
    const LqgGain lq = lqr_gain(cfg.plant, cfg.weights);
    for (const auto& sc : cfg.strategies) {
        EscapeRow row;
        row.strategy = sc;
        if (cfg.explicit_bound) {
            StrategyConfig s = sc;
            s.bound = *cfg.explicit_bound;
            const SteadyStateGains g = steady_state(cfg.plant, s);
            const PerformanceReport rep = compute_performance(cfg.plant, cfg.weights, s, g);
            row.solution.zeta = s.bound;
            row.solution.Z = output_variance(rep, cfg.plant, s)(0, 0);
            row.solution.J = rep.J;
            row.solution.beta = escape_probability(s.bound, row.solution.Z);
            row.solution.tau_analytic = expected_escape_time(row.solution.beta);
            row.solution.converged = true;
            row.ergodicity = check_ergodicity(cfg.plant, lq.K, g);
        } else {
            EscapeQuery q{cfg.plant, cfg.weights, sc, cfg.target_mean_escape, std::nullopt};
            row.solution = solve_zeta(q);
            StrategyConfig s = sc;
            s.bound = row.solution.zeta;
            row.ergodicity = check_ergodicity(cfg.plant, lq.K, steady_state(cfg.plant, s));
        }
        rows.push_back(row);
    }
    return rows;
}

inline std::string escape_csv(const std::vector<EscapeRow>& rows) {
    std::ostringstream os;
    os << "strategy,bits,refine,zeta,beta,tau_a,Z,J,iterations,converged,ergodic,rho_F\n";
    for (const auto& r : rows) {
        os << detail::kind_to_string(r.strategy.kind) << ',' << r.strategy.bits << ','
           << r.strategy.refine << ',' << detail::fmt6(r.solution.zeta) << ','
           << detail::fmt6(r.solution.beta) << ',' << detail::fmt6(r.solution.tau_analytic) << ','
           << detail::fmt6(r.solution.Z) << ',' << detail::fmt6(r.solution.J) << ','
           << r.solution.iterations << ',' << (r.solution.converged ? 1 : 0) << ','
           << (r.ergodicity.passed ? 1 : 0) << ',' << detail::fmt6(r.ergodicity.rho) << '\n';
    }
    return os.str();
}

// ---- simulate ----

struct SimulateRow {
    StrategyConfig strategy;
    double zeta = 0.0;
    MonteCarloSummary summary;
    double analytic_J = 0.0;
};

inline std::vector<SimulateRow> run_simulate(const ExperimentConfig& cfg) {
    std::vector<SimulateRow> rows;
    for (const auto& sc : cfg.strategies) {
        SimulateRow row;
        row.strategy = sc;
        if (cfg.explicit_bound) {
            row.zeta = *cfg.explicit_bound;
        } else {
            EscapeQuery q{cfg.plant, cfg.weights, sc, cfg.target_mean_escape, std::nullopt};
            const EscapeSolution sol = solve_zeta(q);
            if (!sol.converged) throw NonConvergence("simulate: zeta search did not converge");
            row.zeta = sol.zeta;
        }
        StrategyConfig s = sc;
        s.bound = row.zeta;
        row.analytic_J =
            compute_performance(cfg.plant, cfg.weights, s, steady_state(cfg.plant, s)).J;
        SimConfig sim;
        sim.plant = cfg.plant;
        sim.weights = cfg.weights;
        sim.strategy = s;
        sim.horizon = cfg.horizon;
        sim.runs = cfg.runs;
        sim.base_seed = cfg.seed;
        sim.saturation_enabled = cfg.saturation;
        sim.burn_in = cfg.burn_in;
        sim.threads = cfg.threads;
        row.summary = empirical_cost(sim);
        rows.push_back(row);
    }
    return rows;
}

inline std::string simulate_csv(const std::vector<SimulateRow>& rows) {
    std::ostringstream os;
    os << "strategy,bits,refine,zeta,runs,horizon,empirical_J,analytic_J,tau_emp,censored_fraction,"
          "saturation_rate\n";
    for (const auto& r : rows) {
        os << detail::kind_to_string(r.strategy.kind) << ',' << r.strategy.bits << ','
           << r.strategy.refine << ',' << detail::fmt6(r.zeta) << ',' << r.summary.run_count << ','
           << r.summary.horizon << ',' << detail::fmt6(r.summary.empirical_cost) << ','
           << detail::fmt6(r.analytic_J) << ',' << detail::fmt6(r.summary.empirical_mean_escape)
           << ',' << detail::fmt6(r.summary.censored_fraction) << ','
           << detail::fmt6(r.summary.saturation_rate) << '\n';
    }
    return os.str();
}

}  // namespace lqpc
