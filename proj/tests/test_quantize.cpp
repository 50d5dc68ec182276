#include <doctest.h>

#include <algorithm>
#include <set>

#include "asga/quantize.hpp"
#include "asga/tape.hpp"
#include "helpers.hpp"

using namespace asga;
using namespace testutil;

TEST_SUITE_BEGIN("quantize");

TEST_CASE("scale is the largest representable magnitude") {
    Tensor x(1, 4, {0.3, -1.5, 0.7, 1.2});
    CHECK(quant_scale(x, QuantSpec::weights(4)) == 1.5);
    CHECK(quant_scale(x, QuantSpec::activations(4)) == 1.2);

    Tensor neg(1, 3, {-0.2, -0.9, -0.1});
    CHECK(quant_scale(neg, QuantSpec::activations(4)) == 1.0);  // fallback
    Tensor zero(2, 2);
    CHECK(quant_scale(zero, QuantSpec::weights(3)) == 1.0);
}

TEST_CASE("two-bit signed grid collapses to {-s, 0, s}") {
    Tensor x(1, 5, {-0.9, -0.3, 0.0, 0.2, 1.0});
    Tensor q = quantize(x, QuantSpec::weights(2));
    CHECK(q(0, 0) == -1.0);
    CHECK(q(0, 1) == 0.0);  // |{-0.3}| < s/2 rounds to zero
    CHECK(q(0, 2) == 0.0);
    CHECK(q(0, 3) == 0.0);
    CHECK(q(0, 4) == 1.0);
}

TEST_CASE("grid arithmetic for small bit widths") {
    // s = 1, signed 3 bits: levels k/3 for k in -3..3.
    Tensor x(1, 4, {1.0, 0.5, -0.49, 0.17});
    Tensor q = quantize(x, QuantSpec::weights(3));
    CHECK(q(0, 0) == doctest::Approx(1.0));
    CHECK(q(0, 1) == doctest::Approx(2.0 / 3.0));  // 0.5*3 = 1.5 rounds away to 2
    CHECK(q(0, 2) == doctest::Approx(-1.0 / 3.0));
    CHECK(q(0, 3) == doctest::Approx(1.0 / 3.0));  // 0.17*3 = 0.51 rounds to 1

    // s = 3, unsigned 2 bits: levels {0, 1, 2, 3}; negatives clamp to 0.
    Tensor a(1, 5, {3.0, 1.4, 1.5, -2.0, 0.4});
    Tensor qa = quantize(a, QuantSpec::activations(2));
    CHECK(qa(0, 0) == 3.0);
    CHECK(qa(0, 1) == doctest::Approx(1.0));
    CHECK(qa(0, 2) == doctest::Approx(2.0));  // half rounds away from zero
    CHECK(qa(0, 3) == 0.0);
    CHECK(qa(0, 4) == 0.0);
}

TEST_CASE("quantization is exactly idempotent") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor x = random_normal(4, 7, rng, 2.0);
        for (int bits : {2, 3, 4, 6, 8}) {
            for (bool sgn : {true, false}) {
                QuantSpec spec{bits, sgn};
                Tensor q = quantize(x, spec);
                Tensor qq = quantize(q, spec);
                auto qv = q.values();
                auto qqv = qq.values();
                for (std::size_t i = 0; i < qv.size(); ++i) CHECK(qv[i] == qqv[i]);
            }
        }
    }
}

TEST_CASE("ste passes upstream gradient only strictly inside the clamp range") {
    Tensor x(1, 6, {-2.0, -0.5, 0.0, 0.5, 2.0, 1.99});
    Tensor up(1, 6, {1, 1, 1, 1, 1, 1});
    // signed, absmax scale = 2: boundary elements (+-2) are clamped out.
    Tensor g = ste_backward(up, x, QuantSpec::weights(4));
    CHECK(g(0, 0) == 0.0);
    CHECK(g(0, 1) == 1.0);
    CHECK(g(0, 2) == 1.0);
    CHECK(g(0, 3) == 1.0);
    CHECK(g(0, 4) == 0.0);
    CHECK(g(0, 5) == 1.0);

    // unsigned: anything <= 0 is outside, as is the max element.
    Tensor gu = ste_backward(up, x, QuantSpec::activations(4));
    CHECK(gu(0, 0) == 0.0);
    CHECK(gu(0, 1) == 0.0);
    CHECK(gu(0, 2) == 0.0);
    CHECK(gu(0, 3) == 1.0);
    CHECK(gu(0, 4) == 0.0);
    CHECK(gu(0, 5) == 1.0);
}

TEST_CASE("fake_quant tape op forwards quantize and backwards ste") {
    std::mt19937_64 rng(23);
    ParamSet ps;
    ps.add("w", random_normal(3, 4, rng));
    QuantSpec spec = QuantSpec::weights(3);
    Tensor mask = random_normal(3, 4, rng);

    ps.zero_grad();
    Tape t;
    Var q = t.fake_quant(t.param(ps, "w"), spec);
    t.backward(t.sum(t.mul(q, t.constant(mask))));

    Tensor expect_fwd = quantize(ps.at("w"), spec);
    auto fwd = t.value(q).values();
    for (std::size_t i = 0; i < fwd.size(); ++i) CHECK(fwd[i] == expect_fwd.values()[i]);

    Tensor expect_bwd = ste_backward(mask, ps.at("w"), spec);
    auto got = ps.grad_vector();
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == expect_bwd.values()[i]);
}

TEST_CASE("eight-bit gradients track float gradients to one percent") {
    // A quantized linear+relu head should produce nearly the float gradient at
    // 8 bits: grid error ~ s/255 per weight.
    std::mt19937_64 rng(31);
    ParamSet ps;
    ps.add("w", random_normal(6, 4, rng));
    Batch b = random_batch(16, 6, 4, rng);

    auto grad_with = [&](int bits) {
        LossFn loss = [&, bits](Tape& t, const Batch& batch) {
            Var w = t.param(ps, "w");
            if (bits > 0) w = t.fake_quant(w, QuantSpec::weights(bits));
            return t.softmax_cross_entropy(t.matmul(t.constant(batch.x), w), batch.labels);
        };
        return analytic_gradient(loss, ps, b);
    };
    auto gf = grad_with(0);
    auto g8 = grad_with(8);
    // Ignore the one absmax coordinate the STE masks out.
    std::size_t masked = 0;
    double diff = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < gf.size(); ++i) {
        if (g8[i] == 0.0 && gf[i] != 0.0) {
            ++masked;
            continue;
        }
        diff += (g8[i] - gf[i]) * (g8[i] - gf[i]);
        ref += gf[i] * gf[i];
    }
    CHECK(masked <= 1);
    CHECK(std::sqrt(diff / ref) < 1e-2);
}

TEST_CASE("mean squared error shrinks with each extra bit") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 100; ++trial) {
        Tensor x = random_normal(5, 5, rng);
        for (int bits = 2; bits < 8; ++bits) {
            CHECK(quant_error(x, QuantSpec::weights(bits + 1)) <=
                  quant_error(x, QuantSpec::weights(bits)));
        }
        CHECK(quant_error(x, QuantSpec::weights(2)) >= quant_error(x, QuantSpec::weights(8)));

        // 16-bit grid: every element within half a step of the original
        const double s = quant_scale(x, QuantSpec::weights(16));
        Tensor q16 = quantize(x, QuantSpec::weights(16));
        for (std::size_t i = 0; i < x.size(); ++i)
            CHECK(std::abs(q16.values()[i] - x.values()[i]) <= s / (2.0 * ((1 << 15) - 1)) + 1e-15);
    }
}

TEST_CASE("fixed points and zero tensors") {
    for (int bits : {2, 4, 8}) {
        Tensor x(1, 3, {0.0, 1.0, -1.0});
        CHECK(quant_error(x, QuantSpec::weights(bits)) == 0.0);
    }
    Tensor z(3, 3);
    for (int bits : {2, 5, 8}) {
        Tensor q = quantize(z, QuantSpec::weights(bits));
        for (double v : q.values()) CHECK(v == 0.0);
        CHECK(quant_error(z, QuantSpec::weights(bits)) == 0.0);
    }
}

TEST_CASE("spec validation rejects sub-binary grids") {
    CHECK_THROWS_AS(QuantSpec::weights(1).validate(), ContractError);
    CHECK_THROWS_AS(quantize(Tensor::scalar(1.0), QuantSpec::weights(0)), ContractError);
    CHECK_NOTHROW(QuantSpec::weights(2).validate());
}

TEST_CASE("randomized grid properties") {
    std::mt19937_64 rng(53);
    std::uniform_int_distribution<int> bit_dist(2, 8);
    std::uniform_real_distribution<double> val(-3.0, 3.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const int bits = bit_dist(rng);
        const bool sgn = (rng() & 1) != 0;
        QuantSpec spec{bits, sgn};
        Tensor x(1, 12);
        for (double& v : x.values()) v = val(rng);
        const double s = quant_scale(x, spec);
        Tensor q = quantize(x, spec);

        const double lo = sgn ? -s : 0.0;
        std::set<double> levels;
        for (std::size_t i = 0; i < q.size(); ++i) {
            const double qi = q.values()[i];
            const double xi = x.values()[i];
            CHECK(qi >= lo);
            CHECK(qi <= s);
            levels.insert(qi);
            // inside the clamp range the grid is within half a step
            if (xi > lo && xi < s) {
                const double step = s / spec.level_scale();
                CHECK(std::abs(qi - xi) <= 0.5 * step + 1e-12);
            }
        }
        CHECK(levels.size() <= (1u << bits));

        // monotone at fixed scale
        double a = val(rng), b = val(rng);
        if (a > b) std::swap(a, b);
        CHECK(quantize_value(a, s, spec) <= quantize_value(b, s, spec));
    }
}

TEST_SUITE_END();
