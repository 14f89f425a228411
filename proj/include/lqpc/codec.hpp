#pragma once

#include <cstdint>
#include <optional>

#include "lqpc/quantizer.hpp"

namespace lqpc {

struct ConfigError : NumericsError {
    using NumericsError::NumericsError;
};
struct ParityError : NumericsError {
    using NumericsError::NumericsError;
};

enum class StrategyKind { I, II, III };

// Period-two bit-assignment configuration. `bits` is the channel rate b per
// transmission; `refine` is Strategy III's split r (r refinement bits of the
// even sample ride along with the b-r bit odd sample).
struct StrategyConfig {
    StrategyKind kind;
    int bits;
    int refine = 0;
    double bound = 0.0;

    void check() const {
        if (bits < 1) throw ConfigError("strategy: bits must be >= 1");
        if (kind == StrategyKind::III && (refine < 1 || refine > bits - 1))
            throw ConfigError("strategy: refine must be in [1, bits-1]");
        if (kind == StrategyKind::I && bits > 62) throw ConfigError("strategy: bits too large");
        if (kind == StrategyKind::II && 2 * bits > 62) throw ConfigError("strategy: bits too large");
        if (kind == StrategyKind::III && bits + refine > 62) throw ConfigError("strategy: bits too large");
    }

    // Resolution of the quantizer feeding the channel at even / odd times.
    int even_resolution() const {
        switch (kind) {
            case StrategyKind::I: return bits;
            case StrategyKind::II: return 2 * bits;
            case StrategyKind::III: return bits + refine;
        }
        return bits;
    }
    int odd_resolution() const {
        switch (kind) {
            case StrategyKind::I: return bits;
            case StrategyKind::II: return 2 * bits;  // same stream; nothing new is quantized
            case StrategyKind::III: return bits - refine;
        }
        return bits;
    }

    QuantizerSpec even_quantizer() const { return QuantizerSpec(even_resolution(), bound); }
    QuantizerSpec odd_quantizer() const { return QuantizerSpec(odd_resolution(), bound); }
};

struct ChannelMessage {
    long t = 0;
    std::int64_t payload = 0;
};

enum class DecodeTag { Direct, Even, Odd };

struct DecodedMeasurement {
    long t = 0;
    double p = 0.0;
    std::optional<double> p_prime;  // Strategy III refined even sample
    DecodeTag tag = DecodeTag::Direct;
};

namespace detail {

inline std::int64_t floor_div_pow2(std::int64_t a, int bits) {
    return a >> bits;  // arithmetic shift: floor division for any sign
}

inline void assert_fits(std::int64_t payload, int bits) {
    if (payload < 0 || payload >= (std::int64_t{1} << bits))
        throw BitRangeError("codec: payload does not fit channel bits");
}

}  // namespace detail

// ---- Strategy I ----

struct EncodedI {
    ChannelMessage msg;
    bool saturated;
};

inline EncodedI encode_I(const StrategyConfig& cfg, long t, double y, double dither) {
    const QuantizerSpec q(cfg.bits, cfg.bound);
    const QuantizeResult r = quantize_index(q, y + dither);
    detail::assert_fits(r.index, cfg.bits);
    return {{t, r.index}, r.saturated};
}

inline DecodedMeasurement decode_I(const StrategyConfig& cfg, const ChannelMessage& msg, double dither) {
    const QuantizerSpec q(cfg.bits, cfg.bound);
    return {msg.t, dequantize(q, msg.payload) - dither, std::nullopt, DecodeTag::Direct};
}

// ---- Strategy II ----

struct EncodedII {
    ChannelMessage msg_even;  // MSB_b of the 2b-bit index
    ChannelMessage msg_odd;   // LSB_b of the 2b-bit index
    bool saturated;
};

inline EncodedII encode_II(const StrategyConfig& cfg, long t_even, double y_even, double dither) {
    const QuantizerSpec q(2 * cfg.bits, cfg.bound);
    const QuantizeResult r = quantize_index(q, y_even + dither);
    const std::int64_t hi = msb(r.index, 2 * cfg.bits, cfg.bits);
    const std::int64_t lo = lsb(r.index, cfg.bits);
    detail::assert_fits(hi, cfg.bits);
    detail::assert_fits(lo, cfg.bits);
    return {{t_even, hi}, {t_even + 1, lo}, r.saturated};
}

struct DecodedII {
    DecodedMeasurement p_even;  // coarse, no dither subtraction
    DecodedMeasurement p_odd;   // full-resolution refinement of y_even
};

inline DecodedII decode_II(const StrategyConfig& cfg, const ChannelMessage& msg_even,
                           const ChannelMessage& msg_odd, double dither) {
    const QuantizerSpec coarse(cfg.bits, cfg.bound);
    const QuantizerSpec fine(2 * cfg.bits, cfg.bound);
    const std::int64_t index = (msg_even.payload << cfg.bits) + msg_odd.payload;
    DecodedII out;
    out.p_even = {msg_even.t, reconstruct(coarse, msg_even.payload), std::nullopt, DecodeTag::Even};
    out.p_odd = {msg_odd.t, reconstruct(fine, index) - dither, std::nullopt, DecodeTag::Odd};
    return out;
}

// ---- Strategy III ----

struct EncodedIII {
    ChannelMessage msg_even;  // MSB_b of the (b+r)-bit even index
    ChannelMessage msg_odd;   // r refinement bits above the (b-r)-bit odd index
    bool saturated_even;
    bool saturated_odd;
};

inline EncodedIII encode_III(const StrategyConfig& cfg, long t_even, double y_even, double y_odd,
                             double dither_even, double dither_odd) {
    cfg.check();
    const QuantizerSpec qe(cfg.bits + cfg.refine, cfg.bound);
    const QuantizerSpec qo(cfg.bits - cfg.refine, cfg.bound);
    const QuantizeResult re = quantize_index(qe, y_even + dither_even);
    const QuantizeResult ro = quantize_index(qo, y_odd + dither_odd);
    const std::int64_t hi = msb(re.index, cfg.bits + cfg.refine, cfg.bits);
    const std::int64_t refinement = lsb(re.index, cfg.refine);
    const std::int64_t packed = (refinement << (cfg.bits - cfg.refine)) + ro.index;
    detail::assert_fits(hi, cfg.bits);
    detail::assert_fits(packed, cfg.bits);
    return {{t_even, hi}, {t_even + 1, packed}, re.saturated, ro.saturated};
}

struct DecodedIII {
    DecodedMeasurement p_even;  // coarse b-bit even reconstruction, no dither subtraction
    DecodedMeasurement odd;     // carries p_{2k+1} and p'_{2k}
};

inline DecodedIII decode_III(const StrategyConfig& cfg, const ChannelMessage& msg_even,
                             const ChannelMessage& msg_odd, double dither_even, double dither_odd) {
    cfg.check();
    const QuantizerSpec coarse(cfg.bits, cfg.bound);
    const QuantizerSpec fine(cfg.bits + cfg.refine, cfg.bound);
    const QuantizerSpec odd_q(cfg.bits - cfg.refine, cfg.bound);
    const std::int64_t refinement = msb(msg_odd.payload, cfg.bits, cfg.refine);
    const std::int64_t odd_index = lsb(msg_odd.payload, cfg.bits - cfg.refine);
    const std::int64_t even_index = (msg_even.payload << cfg.refine) + refinement;
    DecodedIII out;
    out.p_even = {msg_even.t, reconstruct(coarse, msg_even.payload), std::nullopt, DecodeTag::Even};
    out.odd = {msg_odd.t, reconstruct(odd_q, odd_index) - dither_odd,
               reconstruct(fine, even_index) - dither_even, DecodeTag::Odd};
    return out;
}

// Transmitter + error-free channel + receiver as one sequential state
// machine.  One instance per simulated loop.  With `saturating` false the
// quantizers run as unclamped staircases of the same step (the saturation
// factor removed); messages then bypass the b-bit payload contract.
class StrategyCodec {
  public:
    StrategyCodec(const StrategyConfig& cfg, std::uint64_t dither_seed, bool saturating = true)
        : cfg_(cfg),
          saturating_(saturating),
          even_stream_(cfg.even_quantizer().step(), derive_seed(dither_seed, 1)),
          odd_stream_(cfg.odd_quantizer().step(), derive_seed(dither_seed, 2)) {
        cfg_.check();
    }

    struct StepResult {
        double dither = 0.0;    // dither added to y_t; z_t = y_t + dither
        bool saturated = false;
        ChannelMessage message;
        DecodedMeasurement decoded;
    };

    StepResult step(long t, double y) {
        if ((t % 2 == 0) != even_phase_) throw ParityError("codec: called out of phase");
        StepResult out;
        switch (cfg_.kind) {
            case StrategyKind::I: out = step_I(t, y); break;
            case StrategyKind::II: out = step_II(t, y); break;
            case StrategyKind::III: out = step_III(t, y); break;
        }
        even_phase_ = !even_phase_;
        return out;
    }

    const StrategyConfig& config() const { return cfg_; }

  private:
    // Strategies II/III share one dither stream per quantizer resolution;
    // Strategy I and II draw from the even stream at every step (for II the
    // odd draw only dithers z_t, nothing new is quantized at odd times).
    double draw(long t) {
        if (cfg_.kind == StrategyKind::III && t % 2 != 0) return odd_stream_.next();
        return even_stream_.next();
    }

    StepResult step_I(long t, double y) {
        StepResult r;
        r.dither = draw(t);
        const QuantizerSpec q = cfg_.even_quantizer();
        if (saturating_) {
            const EncodedI enc = encode_I(cfg_, t, y, r.dither);
            r.message = enc.msg;
            r.saturated = enc.saturated;
            r.decoded = decode_I(cfg_, enc.msg, r.dither);
        } else {
            const std::int64_t i = staircase_index(q, y + r.dither);
            r.message = {t, i};
            r.decoded = {t, reconstruct(q, i) - r.dither, std::nullopt, DecodeTag::Direct};
        }
        return r;
    }

    StepResult step_II(long t, double y) {
        StepResult r;
        r.dither = draw(t);
        const QuantizerSpec fine = cfg_.even_quantizer();
        const QuantizerSpec coarse(cfg_.bits, cfg_.bound);
        if (t % 2 == 0) {
            if (saturating_) {
                const QuantizeResult qr = quantize_index(fine, y + r.dither);
                pending_index_ = qr.index;
                r.saturated = qr.saturated;
            } else {
                pending_index_ = staircase_index(fine, y + r.dither);
            }
            pending_dither_ = r.dither;
            const std::int64_t hi = detail::floor_div_pow2(pending_index_, cfg_.bits);
            if (saturating_) detail::assert_fits(hi, cfg_.bits);
            r.message = {t, hi};
            r.decoded = {t, reconstruct(coarse, hi), std::nullopt, DecodeTag::Even};
        } else {
            const std::int64_t hi = detail::floor_div_pow2(pending_index_, cfg_.bits);
            const std::int64_t lo = pending_index_ - (hi << cfg_.bits);
            if (saturating_) detail::assert_fits(lo, cfg_.bits);
            r.message = {t, lo};
            r.decoded = {t, reconstruct(fine, pending_index_) - pending_dither_, std::nullopt,
                         DecodeTag::Odd};
        }
        return r;
    }

    StepResult step_III(long t, double y) {
        StepResult r;
        r.dither = draw(t);
        const QuantizerSpec fine = cfg_.even_quantizer();          // b+r bits
        const QuantizerSpec odd_q = cfg_.odd_quantizer();          // b-r bits
        const QuantizerSpec coarse(cfg_.bits, cfg_.bound);
        if (t % 2 == 0) {
            if (saturating_) {
                const QuantizeResult qr = quantize_index(fine, y + r.dither);
                pending_index_ = qr.index;
                r.saturated = qr.saturated;
            } else {
                pending_index_ = staircase_index(fine, y + r.dither);
            }
            pending_dither_ = r.dither;
            const std::int64_t hi = detail::floor_div_pow2(pending_index_, cfg_.refine);
            if (saturating_) detail::assert_fits(hi, cfg_.bits);
            r.message = {t, hi};
            r.decoded = {t, reconstruct(coarse, hi), std::nullopt, DecodeTag::Even};
        } else {
            std::int64_t odd_index;
            if (saturating_) {
                const QuantizeResult qr = quantize_index(odd_q, y + r.dither);
                odd_index = qr.index;
                r.saturated = qr.saturated;
            } else {
                odd_index = staircase_index(odd_q, y + r.dither);
            }
            const std::int64_t refinement = lsb_signed(pending_index_, cfg_.refine);
            r.message = {t, (refinement << (cfg_.bits - cfg_.refine)) + odd_index};
            if (saturating_) detail::assert_fits(r.message.payload, cfg_.bits);
            r.decoded = {t, reconstruct(odd_q, odd_index) - r.dither,
                         reconstruct(fine, pending_index_) - pending_dither_, DecodeTag::Odd};
        }
        return r;
    }

    static std::int64_t lsb_signed(std::int64_t index, int n) {
        const std::int64_t hi = detail::floor_div_pow2(index, n);
        return index - (hi << n);
    }

    StrategyConfig cfg_;
    bool saturating_;
    DitherStream even_stream_;
    DitherStream odd_stream_;
    bool even_phase_ = true;
    std::int64_t pending_index_ = 0;
    double pending_dither_ = 0.0;
};

}  // namespace lqpc
