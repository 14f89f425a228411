#pragma once

#include <cmath>
#include <cstdint>

#include "lqpc/linalg.hpp"
#include "lqpc/rng.hpp"

namespace lqpc {

struct IndexOutOfRange : NumericsError {
    using NumericsError::NumericsError;
};
struct BitRangeError : NumericsError {
    using NumericsError::NumericsError;
};

// Midrise uniform quantizer with 2^bits levels covering [-bound, bound),
// reconstruction levels -bound + step*(i + 1/2).
struct QuantizerSpec {
    int bits;
    double bound;

    QuantizerSpec(int bits_, double bound_) : bits(bits_), bound(bound_) {
        if (bits < 1 || bits > 62) throw DomainError("quantizer: bits must be in [1,62]");
        if (!(bound > 0.0)) throw DomainError("quantizer: bound must be positive");
    }

    double step() const { return bound / static_cast<double>(std::int64_t{1} << (bits - 1)); }
    std::int64_t levels() const { return std::int64_t{1} << bits; }
};

struct QuantizeResult {
    std::int64_t index;
    bool saturated;
};

// Unclamped staircase index floor((x + bound)/step); realizes the infinite
// quantizer half of the saturating quantizer.
inline std::int64_t staircase_index(const QuantizerSpec& spec, double x) {
    return static_cast<std::int64_t>(std::floor((x + spec.bound) / spec.step()));
}

inline QuantizeResult quantize_index(const QuantizerSpec& spec, double x) {
    if (!std::isfinite(x)) throw DomainError("quantize_index: non-finite input");
    std::int64_t i = staircase_index(spec, x);
    bool saturated = false;
    if (i < 0) {
        i = 0;
        saturated = true;
    } else if (i >= spec.levels()) {
        i = spec.levels() - 1;
        saturated = true;
    }
    return {i, saturated};
}

// Reconstruction without range check, for the unclamped staircase.
inline double reconstruct(const QuantizerSpec& spec, std::int64_t index) {
    return -spec.bound + spec.step() * (static_cast<double>(index) + 0.5);
}

inline double dequantize(const QuantizerSpec& spec, std::int64_t index) {
    if (index < 0 || index >= spec.levels()) throw IndexOutOfRange("dequantize: index out of range");
    return reconstruct(spec, index);
}

struct DitheredResult {
    double value;
    bool saturated;
};

// Q_b(x + d) - d with the saturating midrise quantizer.
inline DitheredResult dithered_quantize(const QuantizerSpec& spec, double x, double d) {
    const QuantizeResult q = quantize_index(spec, x + d);
    return {dequantize(spec, q.index) - d, q.saturated};
}

inline std::int64_t msb(std::int64_t index, int total_bits, int n) {
    if (n < 0 || total_bits < 0 || n > total_bits || total_bits > 62)
        throw BitRangeError("msb: bad bit counts");
    if (index < 0 || index >= (std::int64_t{1} << total_bits)) throw BitRangeError("msb: index out of range");
    return index >> (total_bits - n);
}

inline std::int64_t lsb(std::int64_t index, int n) {
    if (n < 0 || n > 62) throw BitRangeError("lsb: bad bit count");
    if (index < 0) throw BitRangeError("lsb: index out of range");
    return n == 0 ? 0 : index & ((std::int64_t{1} << n) - 1);
}

// cov(q_b) = bound^2 / (3 * 2^(2 bits)) = step^2 / 12
inline double noise_covariance(int bits, double bound) {
    if (bits < 1) throw DomainError("noise_covariance: bits must be >= 1");
    if (!(bound >= 0.0)) throw DomainError("noise_covariance: bound must be nonnegative");
    return bound * bound / (3.0 * std::pow(2.0, 2 * bits));
}

// Uniform dither on [-step/2, step/2], deterministic given the seed.
// One stream per logical endpoint; copies replay identically.
class DitherStream {
  public:
    DitherStream(double step, std::uint64_t seed) : step_(step), seed_(seed), rng_(seed) {}

    double next() {
        ++cursor_;
        return rng_.uniform_sym(0.5 * step_);
    }

    double step_size() const { return step_; }
    std::uint64_t seed() const { return seed_; }
    long cursor() const { return cursor_; }

  private:
    double step_;
    std::uint64_t seed_;
    Rng rng_;
    long cursor_ = 0;
};

}  // namespace lqpc
