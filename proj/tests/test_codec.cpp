#include <catch2/catch_amalgamated.hpp>

#include "lqpc/codec.hpp"

using lqpc::ChannelMessage;
using lqpc::QuantizerSpec;
using lqpc::StrategyConfig;
using lqpc::StrategyKind;

namespace {

StrategyConfig cfg_I(int b, double zeta) { return {StrategyKind::I, b, 0, zeta}; }
StrategyConfig cfg_II(int b, double zeta) { return {StrategyKind::II, b, 0, zeta}; }
StrategyConfig cfg_III(int b, int r, double zeta) { return {StrategyKind::III, b, r, zeta}; }

}  // namespace

TEST_CASE("strategy config validation", "[codec]") {
    CHECK_THROWS_AS(cfg_III(3, 0, 1.0).check(), lqpc::ConfigError);
    CHECK_THROWS_AS(cfg_III(3, 3, 1.0).check(), lqpc::ConfigError);
    CHECK_NOTHROW(cfg_III(3, 2, 1.0).check());
    CHECK_THROWS_AS(cfg_I(0, 1.0).check(), lqpc::ConfigError);
}

TEST_CASE("strategy I: encode/decode mirrors the dithered quantizer", "[codec]") {
    const StrategyConfig cfg = cfg_I(3, 1.0);
    const auto enc = lqpc::encode_I(cfg, 5, 0.1, 0.05);
    CHECK(enc.msg.payload == 4);
    CHECK_FALSE(enc.saturated);
    const auto dec = lqpc::decode_I(cfg, enc.msg, 0.05);
    CHECK(dec.p == Catch::Approx(0.075));

    // midrise offset at the origin
    const auto enc0 = lqpc::encode_I(cfg, 0, 0.0, 0.0);
    CHECK(lqpc::decode_I(cfg, enc0.msg, 0.0).p == Catch::Approx(0.125));
}

TEST_CASE("strategy I: reconstruction error is uniform over random inputs", "[codec]") {
    const StrategyConfig cfg = cfg_I(3, 1.0);
    const QuantizerSpec q(3, 1.0);
    lqpc::DitherStream dither(q.step(), 5);
    lqpc::Rng rng(6);
    const long n = 10000;
    std::vector<double> err;
    for (long i = 0; i < n; ++i) {
        const double y = 1.6 * rng.uniform01() - 0.8;
        const double d = dither.next();
        const auto enc = lqpc::encode_I(cfg, i, y, d);
        if (enc.saturated) continue;
        err.push_back(lqpc::decode_I(cfg, enc.msg, d).p - y);
    }
    std::sort(err.begin(), err.end());
    const double delta = q.step();
    double ks = 0.0;
    for (size_t i = 0; i < err.size(); ++i) {
        const double f = (err[i] + delta / 2) / delta;
        ks = std::max(ks, std::abs(f - (i + 1.0) / err.size()));
        ks = std::max(ks, std::abs(f - static_cast<double>(i) / err.size()));
    }
    CHECK(ks < 1.6276 / std::sqrt(static_cast<double>(err.size())));
}

TEST_CASE("strategy II: worked example and level fixed points", "[codec]") {
    const StrategyConfig cfg = cfg_II(2, 1.0);
    const auto enc = lqpc::encode_II(cfg, 8, 0.3, 0.0);
    CHECK(enc.msg_even.payload == 2);
    CHECK(enc.msg_odd.payload == 2);
    const auto dec = lqpc::decode_II(cfg, enc.msg_even, enc.msg_odd, 0.0);
    CHECK(dec.p_even.p == Catch::Approx(0.25));
    CHECK(dec.p_odd.p == Catch::Approx(0.3125));

    // any 2b-bit level with zero dither reproduces itself at odd time
    const QuantizerSpec fine(4, 1.0);
    for (std::int64_t i = 0; i < fine.levels(); ++i) {
        const double level = lqpc::dequantize(fine, i);
        const auto e = lqpc::encode_II(cfg, 0, level, 0.0);
        CHECK(lqpc::decode_II(cfg, e.msg_even, e.msg_odd, 0.0).p_odd.p == Catch::Approx(level));
    }
}

TEST_CASE("strategy II: odd reconstruction equals direct 2b-bit dithered quantization exactly",
          "[codec]") {
    const int b = 3;
    const StrategyConfig cfg = cfg_II(b, 2.0);
    const QuantizerSpec fine(2 * b, 2.0);
    lqpc::DitherStream dither(fine.step(), 7);
    lqpc::Rng rng(8);

    // exhaustive level sweep with random dithers
    for (std::int64_t i = 0; i < fine.levels(); ++i) {
        const double y = lqpc::dequantize(fine, i) - 0.3 * fine.step();
        const double d = dither.next();
        const auto enc = lqpc::encode_II(cfg, 0, y, d);
        const auto dec = lqpc::decode_II(cfg, enc.msg_even, enc.msg_odd, d);
        const auto direct = lqpc::dithered_quantize(fine, y, d);
        CHECK(dec.p_odd.p == direct.value);  // bit-for-bit
    }
    // random dithered inputs
    for (int i = 0; i < 10000; ++i) {
        const double y = 4.0 * rng.uniform01() - 2.0;
        const double d = dither.next();
        const auto enc = lqpc::encode_II(cfg, 0, y, d);
        const auto dec = lqpc::decode_II(cfg, enc.msg_even, enc.msg_odd, d);
        CHECK(dec.p_odd.p == lqpc::dithered_quantize(fine, y, d).value);
    }
}

TEST_CASE("strategy III: worked example", "[codec]") {
    const StrategyConfig cfg = cfg_III(3, 1, 1.0);
    const auto enc = lqpc::encode_III(cfg, 0, 0.3, -0.2, 0.0, 0.0);
    CHECK(enc.msg_even.payload == 5);  // msb_3 of the 4-bit index 10
    const auto dec = lqpc::decode_III(cfg, enc.msg_even, enc.msg_odd, 0.0, 0.0);
    CHECK(dec.p_even.p == Catch::Approx(0.375));
    CHECK(dec.odd.p_prime.value() == Catch::Approx(0.3125));
}

TEST_CASE("strategy III: refinement identities hold exactly", "[codec]") {
    const int b = 3, r = 1;
    const StrategyConfig cfg = cfg_III(b, r, 1.5);
    const QuantizerSpec fine(b + r, 1.5);
    const QuantizerSpec odd_q(b - r, 1.5);
    lqpc::DitherStream de(fine.step(), 11);
    lqpc::DitherStream dodd(odd_q.step(), 12);
    lqpc::Rng rng(13);

    // level fixed points at zero dither
    for (std::int64_t i = 0; i < fine.levels(); ++i) {
        const double ye = lqpc::dequantize(fine, i);
        const double yo = lqpc::dequantize(odd_q, i % odd_q.levels());
        const auto enc = lqpc::encode_III(cfg, 0, ye, yo, 0.0, 0.0);
        const auto dec = lqpc::decode_III(cfg, enc.msg_even, enc.msg_odd, 0.0, 0.0);
        CHECK(dec.odd.p_prime.value() == Catch::Approx(ye));
        CHECK(dec.odd.p == Catch::Approx(yo));
    }

    // exact equality with the direct dithered quantizers over random inputs
    for (int i = 0; i < 10000; ++i) {
        const double ye = 3.0 * rng.uniform01() - 1.5;
        const double yo = 3.0 * rng.uniform01() - 1.5;
        const double d1 = de.next(), d2 = dodd.next();
        const auto enc = lqpc::encode_III(cfg, 0, ye, yo, d1, d2);
        const auto dec = lqpc::decode_III(cfg, enc.msg_even, enc.msg_odd, d1, d2);
        CHECK(dec.odd.p_prime.value() == lqpc::dithered_quantize(fine, ye, d1).value);
        CHECK(dec.odd.p == lqpc::dithered_quantize(odd_q, yo, d2).value);
    }
}

TEST_CASE("every transmitted payload fits in b bits", "[codec]") {
    lqpc::Rng rng(21);
    for (int b : {1, 2, 3, 4}) {
        const StrategyConfig c1 = cfg_I(b, 1.0);
        const StrategyConfig c2 = cfg_II(b, 1.0);
        for (int i = 0; i < 2000; ++i) {
            const double y = 6.0 * rng.uniform01() - 3.0;  // includes saturating inputs
            const double d = 0.01 * rng.uniform01();
            const std::int64_t cap = std::int64_t{1} << b;
            CHECK(lqpc::encode_I(c1, 0, y, d).msg.payload < cap);
            const auto e2 = lqpc::encode_II(c2, 0, y, d);
            CHECK(e2.msg_even.payload < cap);
            CHECK(e2.msg_odd.payload < cap);
            if (b >= 2) {
                const auto e3 = lqpc::encode_III(cfg_III(b, 1, 1.0), 0, y, -y, d, d);
                CHECK(e3.msg_even.payload < cap);
                CHECK(e3.msg_odd.payload < cap);
            }
        }
    }
}

TEST_CASE("bit packing round-trips through the odd message", "[codec]") {
    const int b = 4, r = 2;
    for (std::int64_t refinement = 0; refinement < (1 << r); ++refinement) {
        for (std::int64_t coarse = 0; coarse < (1 << (b - r)); ++coarse) {
            const std::int64_t packed = (refinement << (b - r)) + coarse;
            CHECK(lqpc::msb(packed, b, r) == refinement);
            CHECK(lqpc::lsb(packed, b - r) == coarse);
        }
    }
}

TEST_CASE("stateful codec: parity enforcement and determinism", "[codec]") {
    const StrategyConfig cfg = cfg_II(3, 2.0);
    lqpc::StrategyCodec codec(cfg, 31337);
    CHECK_THROWS_AS(codec.step(1, 0.0), lqpc::ParityError);

    lqpc::StrategyCodec a(cfg, 99), b(cfg, 99);
    lqpc::Rng rng(1);
    for (long t = 0; t < 64; ++t) {
        const double y = 3.0 * rng.uniform01() - 1.5;
        const auto ra = a.step(t, y);
        const auto rb = b.step(t, y);
        CHECK(ra.dither == rb.dither);
        CHECK(ra.decoded.p == rb.decoded.p);
        CHECK(ra.message.payload == rb.message.payload);
    }
}

TEST_CASE("stateful codec: strategy II odd step refines the stored even sample", "[codec]") {
    const StrategyConfig cfg = cfg_II(2, 1.0);
    lqpc::StrategyCodec codec(cfg, 5);
    const double y_even = 0.3;
    const auto even = codec.step(0, y_even);
    CHECK(even.decoded.tag == lqpc::DecodeTag::Even);
    const auto odd = codec.step(1, -0.9);  // odd input ignored by strategy II
    CHECK(odd.decoded.tag == lqpc::DecodeTag::Odd);
    // the odd reconstruction equals the direct fine quantization of y_even
    const QuantizerSpec fine(4, 1.0);
    CHECK(odd.decoded.p == lqpc::dithered_quantize(fine, y_even, even.dither).value);
}
