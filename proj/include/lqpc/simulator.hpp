#pragma once

#include <limits>
#include <optional>
#include <thread>
#include <vector>

#include "lqpc/escape.hpp"

namespace lqpc {

struct SimConfig {
    PlantModel plant;
    CostWeights weights;
    StrategyConfig strategy;  // bound must be set
    long horizon = 5000;
    long runs = 1;
    std::uint64_t base_seed = 1;
    bool saturation_enabled = true;
    bool dither_enabled = true;
    long burn_in = 1000;  // discarded by the cost estimator
    int threads = 0;      // 0: hardware concurrency
    Vector initial_state; // empty: zero

    void check() const {
        plant.check_dims();
        strategy.check();
        if (plant.m() != 1) throw DimensionError("simulator: scalar output only");
        if (horizon < 0 || runs < 1) throw ConfigError("simulator: horizon/runs invalid");
        if (!(strategy.bound > 0.0)) throw ConfigError("simulator: strategy bound must be set");
    }
};

struct SimTrace {
    std::vector<double> y, z, u, p;
    std::vector<double> p_prime;          // NaN except Strategy III odd times
    std::vector<std::int64_t> payload;
    std::vector<Vector> x, x_filt;
    std::vector<long> saturation_events;
    std::optional<long> first_escape;     // 1-based step count
};

struct MonteCarloSummary {
    double empirical_cost = 0.0;
    double empirical_mean_escape = 0.0;
    double censored_fraction = 0.0;
    double saturation_rate = 0.0;
    long run_count = 0;
    long horizon = 0;
    std::uint64_t base_seed = 0;
};

namespace detail {

struct RunStats {
    double cost_sum = 0.0;
    long cost_steps = 0;
    long first_escape = 0;  // 0: censored
    long saturations = 0;
};

inline Matrix chol_factor(const Matrix& m, const char* what) {
    Eigen::LLT<Matrix> llt(symmetrized(m));
    if (llt.info() == Eigen::Success) return llt.matrixL();
    // PSD with zero modes: fall back to an eigenvalue square root.
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(m));
    if (es.eigenvalues().minCoeff() < -1e-10 * (1.0 + max_abs(m)))
        throw DomainError(std::string(what) + ": covariance not PSD");
    return es.eigenvectors() *
           es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

// One closed-loop instance: plant, coder/decoder, frozen-gain estimator,
// feedback.  All buffers preallocated; step() performs no allocation.
class LoopStepper {
  public:
    LoopStepper(const SimConfig& cfg, const LqgGain& lq, const SteadyStateGains& gains,
                std::uint64_t run_seed)
        : cfg_(cfg),
          kind_(cfg.strategy.kind),
          codec_(cfg.strategy, derive_seed(run_seed, 17), cfg.saturation_enabled),
          noise_(derive_seed(run_seed, 3)),
          n_(cfg.plant.n()),
          A_(cfg.plant.A),
          B_(cfg.plant.B),
          C_row_(cfg.plant.C.row(0)),
          K_(lq.K),
          Acl_(lq.closed_loop),
          BK_(cfg.plant.B * lq.K),
          Qc_(cfg.weights.Qc),
          Rc_(cfg.weights.Rc),
          chol_q_(chol_factor(cfg.plant.Q, "Q")),
          sigma_v_(std::sqrt(cfg.plant.R(0, 0))),
          l_even_(gains.L_even.col(0)),
          l_odd_(gains.L_odd.col(0)),
          l_odd1_(cfg.strategy.kind == StrategyKind::III ? Vector(gains.L_odd1.col(0))
                                                         : Vector::Zero(n_)),
          x_(cfg.initial_state.size() ? cfg.initial_state : Vector::Zero(n_)),
          x_pred_(Vector::Zero(n_)),
          x_filt_(Vector::Zero(n_)),
          aux_even_(Vector::Zero(n_)),
          u_(Vector::Zero(cfg.plant.p())),
          w_(Vector::Zero(n_)),
          g_(Vector::Zero(n_)),
          tmp_(Vector::Zero(n_)),
          tmp2_(Vector::Zero(n_)) {
        if (!cfg_.dither_enabled) codec_disable_dither_ = true;
    }

    struct StepOut {
        double y, z, u0, p;
        double p_prime;  // NaN unless present
        std::int64_t payload;
        bool saturated;
    };

    StepOut step(long t) {
        StepOut out{};
        const double v = sigma_v_ * noise_.gaussian();
        out.y = C_row_.dot(x_) + v;

        const StrategyCodec::StepResult cs =
            codec_disable_dither_ ? zero_dither_step(t, out.y) : codec_.step(t, out.y);
        out.z = out.y + cs.dither;
        out.payload = cs.message.payload;
        out.saturated = cs.saturated;
        out.p = cs.decoded.p;
        out.p_prime = cs.decoded.p_prime ? *cs.decoded.p_prime
                                         : std::numeric_limits<double>::quiet_NaN();

        update_filter(t, cs.decoded);
        u_.noalias() = -(K_ * x_filt_);
        out.u0 = u_(0);

        // advance the plant
        for (Eigen::Index i = 0; i < n_; ++i) g_(i) = noise_.gaussian();
        w_.noalias() = chol_q_ * g_;
        tmp_.noalias() = A_ * x_;
        tmp_.noalias() += B_ * u_;
        x_ = tmp_ + w_;
        return out;
    }

    const Vector& state() const { return x_; }
    const Vector& estimate() const { return x_filt_; }

    // quadratic cost of the step that was just produced (x and u before advance)
    double step_cost(const Vector& x_before) {
        tmp_.noalias() = Qc_ * x_before;
        double c = x_before.dot(tmp_);
        c += u_.dot(Rc_ * u_);
        return c;
    }

  private:
    // Zero-dither variant used by noise-free sanity checks.
    StrategyCodec::StepResult zero_dither_step(long t, double y) {
        StrategyCodec::StepResult r;
        r.dither = 0.0;
        const StrategyConfig& sc = cfg_.strategy;
        const QuantizerSpec even_q = sc.even_quantizer();
        const QuantizerSpec coarse(sc.bits, sc.bound);
        auto index_of = [&](const QuantizerSpec& q, double val, bool& sat) {
            if (cfg_.saturation_enabled) {
                const QuantizeResult qr = quantize_index(q, val);
                sat = qr.saturated;
                return qr.index;
            }
            sat = false;
            return staircase_index(q, val);
        };
        bool sat = false;
        if (kind_ == StrategyKind::I) {
            const std::int64_t i = index_of(even_q, y, sat);
            r.saturated = sat;
            r.message = {t, i};
            r.decoded = {t, reconstruct(even_q, i), std::nullopt, DecodeTag::Direct};
        } else if (kind_ == StrategyKind::II) {
            if (t % 2 == 0) {
                zd_pending_ = index_of(even_q, y, sat);
                r.saturated = sat;
                const std::int64_t hi = zd_pending_ >> sc.bits;
                r.message = {t, hi};
                r.decoded = {t, reconstruct(coarse, hi), std::nullopt, DecodeTag::Even};
            } else {
                const std::int64_t hi = zd_pending_ >> sc.bits;
                r.message = {t, zd_pending_ - (hi << sc.bits)};
                r.decoded = {t, reconstruct(even_q, zd_pending_), std::nullopt, DecodeTag::Odd};
            }
        } else {
            const QuantizerSpec odd_q = sc.odd_quantizer();
            if (t % 2 == 0) {
                zd_pending_ = index_of(even_q, y, sat);
                r.saturated = sat;
                const std::int64_t hi = zd_pending_ >> sc.refine;
                r.message = {t, hi};
                r.decoded = {t, reconstruct(coarse, hi), std::nullopt, DecodeTag::Even};
            } else {
                const std::int64_t j = index_of(odd_q, y, sat);
                r.saturated = sat;
                r.message = {t, j};
                r.decoded = {t, reconstruct(odd_q, j), reconstruct(even_q, zd_pending_),
                             DecodeTag::Odd};
            }
        }
        return r;
    }

    void update_filter(long t, const DecodedMeasurement& d) {
        switch (kind_) {
            case StrategyKind::I: {
                const double innov = d.p - C_row_.dot(x_pred_);
                x_filt_ = x_pred_ + l_even_ * innov;
                x_pred_.noalias() = Acl_ * x_filt_;
                break;
            }
            case StrategyKind::II: {
                if (t % 2 == 0) {
                    const double innov = d.p - C_row_.dot(x_pred_);
                    x_filt_ = x_pred_ + l_even_ * innov;
                    aux_even_ = x_filt_;
                } else {
                    const double innov = d.p - C_row_.dot(x_pred_);
                    tmp2_ = x_pred_ + l_odd_ * innov;
                    x_filt_.noalias() = A_ * tmp2_;
                    x_filt_.noalias() -= BK_ * aux_even_;
                    x_pred_.noalias() = Acl_ * x_filt_;
                }
                break;
            }
            case StrategyKind::III: {
                if (t % 2 == 0) {
                    const double innov = d.p - C_row_.dot(x_pred_);
                    x_filt_ = x_pred_ + l_even_ * innov;
                    aux_even_ = x_filt_;
                } else {
                    const double innov_p = *d.p_prime - C_row_.dot(x_pred_);
                    tmp2_ = x_pred_ + l_odd1_ * innov_p;
                    tmp_.noalias() = A_ * tmp2_;
                    tmp_.noalias() -= BK_ * aux_even_;  // xhat'_{2k+1|2k}
                    const double innov = d.p - C_row_.dot(tmp_);
                    x_filt_ = tmp_ + l_odd_ * innov;
                    x_pred_.noalias() = Acl_ * x_filt_;
                }
                break;
            }
        }
    }

    const SimConfig& cfg_;
    StrategyKind kind_;
    StrategyCodec codec_;
    Rng noise_;
    Eigen::Index n_;
    Matrix A_, B_;
    Eigen::RowVectorXd C_row_;
    Matrix K_, Acl_, BK_, Qc_, Rc_;
    Matrix chol_q_;
    double sigma_v_;
    Vector l_even_, l_odd_, l_odd1_;
    Vector x_, x_pred_, x_filt_, aux_even_, u_, w_, g_, tmp_, tmp2_;
    bool codec_disable_dither_ = false;
    std::int64_t zd_pending_ = 0;
};

inline RunStats run_stats(const SimConfig& cfg, const LqgGain& lq, const SteadyStateGains& gains,
                          long run_index) {
    const std::uint64_t run_seed = cfg.base_seed ^ static_cast<std::uint64_t>(run_index);
    LoopStepper loop(cfg, lq, gains, run_seed);
    RunStats st;
    const double zeta = cfg.strategy.bound;
    Vector x_before(cfg.plant.n());
    for (long t = 0; t < cfg.horizon; ++t) {
        x_before = loop.state();
        const LoopStepper::StepOut so = loop.step(t);
        if (st.first_escape == 0 && std::abs(so.z) > zeta) st.first_escape = t + 1;
        st.saturations += so.saturated;
        if (t >= cfg.burn_in) {
            st.cost_sum += loop.step_cost(x_before);
            ++st.cost_steps;
        }
    }
    return st;
}

inline std::vector<RunStats> all_run_stats(const SimConfig& cfg) {
    cfg.check();
    const LqgGain lq = lqr_gain(cfg.plant, cfg.weights);
    const SteadyStateGains gains = steady_state(cfg.plant, cfg.strategy);
    std::vector<RunStats> stats(cfg.runs);
    int threads = cfg.threads > 0 ? cfg.threads
                                  : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    threads = static_cast<int>(std::min<long>(threads, cfg.runs));
    if (threads <= 1) {
        for (long r = 0; r < cfg.runs; ++r) stats[r] = run_stats(cfg, lq, gains, r);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (int w = 0; w < threads; ++w) {
            pool.emplace_back([&, w]() {
                for (long r = w; r < cfg.runs; r += threads) stats[r] = run_stats(cfg, lq, gains, r);
            });
        }
        for (auto& th : pool) th.join();
    }
    return stats;
}

inline MonteCarloSummary summarize(const SimConfig& cfg, const std::vector<RunStats>& stats) {
    MonteCarloSummary s;
    s.run_count = cfg.runs;
    s.horizon = cfg.horizon;
    s.base_seed = cfg.base_seed;
    double cost = 0.0;
    long cost_steps = 0;
    double escape_sum = 0.0;
    long censored = 0;
    long saturations = 0;
    for (const auto& st : stats) {
        cost += st.cost_sum;
        cost_steps += st.cost_steps;
        escape_sum += st.first_escape == 0 ? static_cast<double>(cfg.horizon)
                                           : static_cast<double>(st.first_escape);
        censored += st.first_escape == 0;
        saturations += st.saturations;
    }
    s.empirical_cost = cost_steps > 0 ? cost / static_cast<double>(cost_steps) : 0.0;
    s.empirical_mean_escape = cfg.runs > 0 ? escape_sum / static_cast<double>(cfg.runs) : 0.0;
    s.censored_fraction = cfg.runs > 0 ? static_cast<double>(censored) / cfg.runs : 0.0;
    s.saturation_rate = cfg.horizon > 0 && cfg.runs > 0
                            ? static_cast<double>(saturations) /
                                  (static_cast<double>(cfg.horizon) * cfg.runs)
                            : 0.0;
    return s;
}

}  // namespace detail

// Full trace of one run (run_index selects the derived seed).
inline SimTrace run_closed_loop(const SimConfig& cfg, long run_index = 0) {
    cfg.check();
    const LqgGain lq = lqr_gain(cfg.plant, cfg.weights);
    const SteadyStateGains gains = steady_state(cfg.plant, cfg.strategy);
    const std::uint64_t run_seed = cfg.base_seed ^ static_cast<std::uint64_t>(run_index);
    detail::LoopStepper loop(cfg, lq, gains, run_seed);
    SimTrace tr;
    tr.y.reserve(cfg.horizon);
    const double zeta = cfg.strategy.bound;
    for (long t = 0; t < cfg.horizon; ++t) {
        tr.x.push_back(loop.state());
        const auto so = loop.step(t);
        tr.y.push_back(so.y);
        tr.z.push_back(so.z);
        tr.u.push_back(so.u0);
        tr.p.push_back(so.p);
        tr.p_prime.push_back(so.p_prime);
        tr.payload.push_back(so.payload);
        tr.x_filt.push_back(loop.estimate());
        if (so.saturated) tr.saturation_events.push_back(t);
        if (!tr.first_escape && std::abs(so.z) > zeta) tr.first_escape = t + 1;
    }
    return tr;
}

// Mean first time |z_t| > zeta over runs; runs with no escape contribute the
// horizon and are counted in censored_fraction.
inline MonteCarloSummary empirical_escape_time(const SimConfig& cfg) {
    return detail::summarize(cfg, detail::all_run_stats(cfg));
}

// Time-and-run average of x'Qc x + u'Rc u after burn-in.
inline MonteCarloSummary empirical_cost(const SimConfig& cfg) {
    return detail::summarize(cfg, detail::all_run_stats(cfg));
}

}  // namespace lqpc
