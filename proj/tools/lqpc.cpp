// Experiment runner: LQ control over a fixed-bitrate channel with period-two
// coding.  Subcommands: design | table | trace | escape | simulate.
// JSON config in, CSV out.  Exit codes: 0 ok, 1 runtime/solver failure,
// 2 config/validation failure.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "lqpc/experiment.hpp"

namespace {

int write_out(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return 0;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) {
        std::cerr << "cannot open output file: " << out_path << "\n";
        return 1;
    }
    out << text;
    return 0;
}

lqpc::StrategyConfig pick_strategy(const lqpc::ExperimentConfig& cfg, const std::string& sel) {
    if (sel.empty()) return cfg.strategies.front();
    for (const auto& s : cfg.strategies)
        if (lqpc::detail::kind_to_string(s.kind) == sel) return s;
    throw lqpc::ConfigError("strategy '" + sel + "' not present in config");
}

std::string matrix_text(const lqpc::Matrix& m) {
    std::ostringstream os;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            os << (c ? " " : "") << lqpc::detail::fmt6(m(r, c));
        os << '\n';
    }
    return os.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LQ control with period-two coded quantized feedback"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, out_path, strategy_sel;
    bool with_sim = false;
    std::int64_t seed_override = -1;

    app.add_option("--config", config_path, "JSON experiment config")->required();
    app.add_option("--out", out_path, "output file (default stdout)");
    app.add_option("--seed", seed_override, "override the config RNG seed");
    app.add_option("--strategy", strategy_sel, "strategy selector: I, II or III");
    app.add_flag("--simulate", with_sim, "add empirical columns (table mode)");

    auto* design = app.add_subcommand("design", "LQ gain synthesis and model checks");
    auto* table = app.add_subcommand("table", "per-Rc table: gain, bound, escape time, costs");
    auto* trace = app.add_subcommand("trace", "single-run closed-loop trace");
    auto* escape = app.add_subcommand("escape", "quantizer bound search per strategy");
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo cost and escape time");

    CLI11_PARSE(app, argc, argv);

    lqpc::ExperimentConfig cfg;
    try {
        cfg = lqpc::load_config(config_path);
        if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
    } catch (const lqpc::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }

    try {
        if (design->parsed()) {
            const lqpc::DesignReport rep = lqpc::run_design(cfg);
            std::ostringstream os;
            for (const auto& f : rep.findings)
                os << (f.passed ? "pass" : "FAIL") << "  " << f.check
                   << (f.detail.empty() ? "" : ": " + f.detail) << '\n';
            if (rep.ok) {
                os << "K:\n" << matrix_text(rep.gain.K);
                os << "A-BK:\n" << matrix_text(rep.gain.closed_loop);
                os << "rho(A-BK): " << lqpc::detail::fmt6(lqpc::spectral_radius(rep.gain.closed_loop))
                   << '\n';
            }
            const int rc = write_out(os.str(), out_path);
            return rc != 0 ? rc : (rep.ok ? 0 : 2);
        }
        if (table->parsed()) {
            const lqpc::TableResult res = lqpc::run_table(cfg, with_sim);
            const int rc = write_out(lqpc::table_csv(res), out_path);
            return rc != 0 ? rc : (res.any_failed ? 1 : 0);
        }
        if (trace->parsed()) {
            const lqpc::TraceResult res = lqpc::run_trace(cfg, pick_strategy(cfg, strategy_sel));
            return write_out(lqpc::trace_csv(res), out_path);
        }
        if (escape->parsed()) {
            const auto rows = lqpc::run_escape(cfg);
            const int rc = write_out(lqpc::escape_csv(rows), out_path);
            if (rc != 0) return rc;
            for (const auto& r : rows)
                if (!r.solution.converged) return 1;
            return 0;
        }
        if (simulate->parsed()) {
            std::vector<lqpc::StrategyConfig> chosen;
            if (!strategy_sel.empty()) chosen.push_back(pick_strategy(cfg, strategy_sel));
            lqpc::ExperimentConfig run_cfg = cfg;
            if (!chosen.empty()) run_cfg.strategies = chosen;
            const auto rows = lqpc::run_simulate(run_cfg);
            return write_out(lqpc::simulate_csv(rows), out_path);
        }
    } catch (const lqpc::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }
    return 0;
}
