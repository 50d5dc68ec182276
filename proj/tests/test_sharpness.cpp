#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "asga/sharpness.hpp"
#include "helpers.hpp"

using namespace asga;
using namespace testutil;

TEST_SUITE_BEGIN("sharpness");

namespace {

ParamSet vec_params(std::vector<double> theta) {
    ParamSet ps;
    ps.add("theta", Tensor::row(std::move(theta)));
    return ps;
}

Tensor diag2(double a, double b) { return Tensor(2, 2, {a, 0, 0, b}); }

}  // namespace

TEST_CASE("ascent direction normalizes the gradient") {
    std::mt19937_64 rng(1);
    auto d = unit_or_random({3.0, 4.0}, 1e-12, 1.0, rng);
    CHECK(d[0] == doctest::Approx(0.6).epsilon(1e-14));
    CHECK(d[1] == doctest::Approx(0.8).epsilon(1e-14));

    auto d10 = unit_or_random({30.0, 40.0}, 1e-12, 1.0, rng);
    CHECK(d10[0] == doctest::Approx(d[0]).epsilon(1e-14));
    CHECK(d10[1] == doctest::Approx(d[1]).epsilon(1e-14));
}

TEST_CASE("zero gradient falls back to a seeded random unit vector") {
    std::mt19937_64 rng_a(77), rng_b(77), rng_c(78);
    auto a = unit_or_random({0.0, 0.0, 0.0}, 1e-12, 1.0, rng_a);
    auto b = unit_or_random({0.0, 0.0, 0.0}, 1e-12, 1.0, rng_b);
    auto c = unit_or_random({0.0, 0.0, 0.0}, 1e-12, 1.0, rng_c);
    CHECK(std::abs(l2(a) - 1.0) < 1e-12);
    CHECK(a == b);  // same seed, same direction
    CHECK(a != c);
}

TEST_CASE("perturbed loss on the diagonal quadratic") {
    // L = 0.5 theta' diag(1,10) theta at theta=(1,0): grad=(1,0), d=(1,0),
    // L = 0.5, L_p = 0.5 * 1.1^2 = 0.605.
    ParamSet ps = vec_params({1.0, 0.0});
    LossFn loss = quadratic_loss(ps, diag2(1.0, 10.0));
    PerturbParams p;
    p.rho = 0.1;
    std::mt19937_64 rng(5);
    auto [l, lp] = perturbed_loss(loss, ps, dummy_batch(), p, rng);
    CHECK(l == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(lp == doctest::Approx(0.605).epsilon(1e-12));
    CHECK(surrogate_gap(l, lp) == doctest::Approx(0.105).epsilon(1e-10));
}

TEST_CASE("perturbed loss restores parameters bit-identically") {
    std::mt19937_64 rng(9);
    ParamSet ps;
    ps.add("w1", random_normal(4, 5, rng));
    ps.add("w2", random_normal(5, 3, rng));
    Batch b = random_batch(6, 4, 3, rng);
    LossFn loss = [&ps](Tape& t, const Batch& batch) {
        Var h = t.relu(t.matmul(t.constant(batch.x), t.param(ps, "w1")));
        return t.softmax_cross_entropy(t.matmul(h, t.param(ps, "w2")), batch.labels);
    };
    const std::uint64_t before = ps.value_hash();
    PerturbParams p;
    p.rho = 0.25;
    perturbed_loss(loss, ps, b, p, rng);
    CHECK(ps.value_hash() == before);
}

TEST_CASE("first-order gap shrinks like rho at small rho") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 5; ++trial) {
        ParamSet ps;
        ps.add("w1", random_normal(3, 6, rng));
        ps.add("w2", random_normal(6, 2, rng));
        Batch b = random_batch(5, 3, 2, rng);
        LossFn loss = [&ps](Tape& t, const Batch& batch) {
            Var h = t.relu(t.matmul(t.constant(batch.x), t.param(ps, "w1")));
            return t.softmax_cross_entropy(t.matmul(h, t.param(ps, "w2")), batch.labels);
        };
        double gnorm = l2(analytic_gradient(loss, ps, b));
        PerturbParams p;
        p.rho = 1e-6;
        auto [l, lp] = perturbed_loss(loss, ps, b, p, rng);
        // Taylor: |L_p - L| <= rho*||grad|| + O(rho^2)
        CHECK(std::abs(lp - l) <= p.rho * gnorm + 1e-9);
        CHECK(lp >= l);  // ascent along the gradient
    }
}

TEST_CASE("gap arithmetic") {
    CHECK(surrogate_gap(1.00, 1.02) == doctest::Approx(0.02).epsilon(1e-12));
    CHECK(sigma_from_gap(0.02, 0.1) == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(surrogate_gap(1.0, 1.0) == 0.0);
    CHECK(sigma_from_gap(0.0, 0.5) == 0.0);
    CHECK_THROWS_AS(sigma_from_gap(0.1, 0.0), ContractError);
    CHECK_THROWS_AS(sigma_from_gap(0.1, -1.0), ContractError);
}

TEST_CASE("convex quadratics never see a negative gap") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> coord(-2.0, 2.0);
    for (int trial = 0; trial < 50; ++trial) {
        ParamSet ps = vec_params({coord(rng), coord(rng), coord(rng)});
        Eigen::Matrix3d b = Eigen::Matrix3d::NullaryExpr([&]() { return coord(rng); });
        Eigen::Matrix3d spd = b.transpose() * b + 0.1 * Eigen::Matrix3d::Identity();
        Tensor a(3, 3);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) a(r, c) = spd(r, c);
        LossFn loss = quadratic_loss(ps, a);
        PerturbParams p;
        p.rho = 0.2;
        auto [l, lp] = perturbed_loss(loss, ps, dummy_batch(), p, rng);
        CHECK(surrogate_gap(l, lp) >= 0.0);
    }
}

TEST_CASE("power iteration on closed-form quadratics") {
    ParamSet ps = vec_params({1.0, 1.0});
    LossFn loss = quadratic_loss(ps, diag2(1.0, 10.0));
    auto [lam, v] = hessian_eig_power(loss, ps, dummy_batch(), 50, 3);
    CHECK(lam == doctest::Approx(10.0).epsilon(1e-3));
    CHECK(std::abs(l2(v) - 1.0) < 1e-9);
    CHECK(std::abs(v[1]) > 0.999);  // dominant axis

    ParamSet iso = vec_params({0.3, -0.7});
    LossFn liso = quadratic_loss(iso, diag2(1.0, 1.0));
    for (std::uint64_t seed : {1ull, 9ull, 42ull}) {
        auto [one, _] = hessian_eig_power(liso, iso, dummy_batch(), 20, seed);
        CHECK(one == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("power iteration matches a dense eigensolve") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> coord(-1.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::Matrix<double, 5, 5> b =
            Eigen::Matrix<double, 5, 5>::NullaryExpr([&]() { return coord(rng); });
        Eigen::Matrix<double, 5, 5> spd =
            b.transpose() * b + 0.1 * Eigen::Matrix<double, 5, 5>::Identity();
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 5, 5>> eig(spd);
        const double lam_max = eig.eigenvalues().maxCoeff();

        Tensor a(5, 5);
        for (int r = 0; r < 5; ++r)
            for (int c = 0; c < 5; ++c) a(r, c) = spd(r, c);
        ParamSet ps = vec_params({coord(rng), coord(rng), coord(rng), coord(rng), coord(rng)});
        LossFn loss = quadratic_loss(ps, a);
        auto [lam, v] = hessian_eig_power(loss, ps, dummy_batch(), 400, 7 + trial);
        CHECK(lam == doctest::Approx(lam_max).epsilon(1e-3));
        (void)v;
    }
}

TEST_CASE("sigma at a quadratic minimum reaches the top eigenvalue") {
    // At theta = 0 the gradient vanishes; along the power-iteration direction
    // the gap recovers lambda_max exactly, and along any direction it cannot
    // exceed it.
    ParamSet ps = vec_params({0.0, 0.0});
    LossFn loss = quadratic_loss(ps, diag2(1.0, 10.0));
    auto [lam, v] = hessian_eig_power(loss, ps, dummy_batch(), 60, 11);
    const double rho = 0.05;
    auto [l, lp] = loss_pair_along(loss, ps, dummy_batch(), v, rho);
    CHECK(sigma_from_gap(surrogate_gap(l, lp), rho) == doctest::Approx(lam).epsilon(1e-6));

    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        auto dir = unit_or_random({0.0, 0.0}, 1e-12, 1.0, rng);
        auto [l2v, lp2] = loss_pair_along(loss, ps, dummy_batch(), dir, rho);
        CHECK(sigma_from_gap(surrogate_gap(l2v, lp2), rho) <= 10.0 + 1e-6);
    }
}

TEST_CASE("report bundles the gap and optional eigenvalue consistently") {
    std::mt19937_64 rng(37);
    ParamSet ps = vec_params({0.8, -0.6});
    LossFn loss = quadratic_loss(ps, diag2(2.0, 5.0));
    PerturbParams p;
    p.rho = 0.1;

    SharpnessReport r = sharpness_report(loss, ps, dummy_batch(), p, rng);
    CHECK(r.rho == 0.1);
    CHECK(std::abs(r.gap - (r.perturbed_loss - r.loss)) < 1e-12);
    CHECK(std::abs(r.sigma_gap - 2.0 * r.gap / (r.rho * r.rho)) < 1e-12);
    CHECK_FALSE(r.sigma_power.has_value());

    SharpnessReport rp = sharpness_report(loss, ps, dummy_batch(), p, rng, 60, 5);
    REQUIRE(rp.sigma_power.has_value());
    CHECK(*rp.sigma_power == doctest::Approx(5.0).epsilon(1e-3));
}

TEST_CASE("landscape probe closed forms") {
    auto square = [](double x) { return x * x; };
    std::vector<double> grid = {0.0};
    std::vector<double> rhos = {0.1};
    auto rows = landscape_probe(square, grid, rhos);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].loss == 0.0);
    CHECK(rows[0].perturbed_loss == doctest::Approx(0.01).epsilon(1e-9));
    CHECK(rows[0].gap == doctest::Approx(0.01).epsilon(1e-9));
    CHECK(rows[0].sigma == doctest::Approx(2.0).epsilon(1e-9));

    auto flat = [](double) { return 3.25; };
    std::vector<double> grid2 = {-1.0, 0.0, 2.0};
    auto frows = landscape_probe(flat, grid2, rhos);
    for (const auto& row : frows) {
        CHECK(row.gap == 0.0);
        CHECK(row.sigma == 0.0);
    }
}

TEST_CASE("probe oracle dominates the linearized estimate on convex functions") {
    auto convex = [](double x) { return std::exp(0.5 * x) + x * x; };
    std::vector<double> grid;
    for (double x = -1.0; x <= 1.0; x += 0.25) grid.push_back(x);
    std::vector<double> rhos = {0.05, 0.2};
    auto rows = landscape_probe(convex, grid, rhos);
    const double h = 1e-7;
    for (const auto& row : rows) {
        double x = row.point[0];
        double slope = (convex(x + h) - convex(x - h)) / (2.0 * h);
        double linear_max = row.loss + row.rho * std::abs(slope);
        CHECK(row.perturbed_loss >= linear_max - 1e-9);
    }
}

TEST_CASE("two-minima landscape separates sharp from flat") {
    // Values at the two minima come from the closed form.
    CHECK(two_minima(-2.0) == doctest::Approx(0.1 - 0.8 * std::exp(-8.0)).epsilon(1e-12));
    CHECK(two_minima(2.0) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(two_minima(0.0) < 1.0 + 1e-12);

    std::vector<double> grid = {-2.0, 2.0};
    for (double rho : {0.05, 0.1, 0.2, 0.3}) {
        std::vector<double> rhos = {rho};
        auto rows = landscape_probe(two_minima, grid, rhos);
        REQUIRE(rows.size() == 2);
        CHECK(rows[0].gap > rows[1].gap);  // sharp minimum has the bigger gap
        CHECK(rows[0].gap > 0.0);
        CHECK(rows[1].gap >= 0.0);
    }
}

TEST_CASE("two-dimensional probe scans the disc") {
    auto bowl = [](double x, double y) { return x * x + 4.0 * y * y; };
    std::vector<std::pair<double, double>> grid = {{0.0, 0.0}};
    std::vector<double> rhos = {0.1};
    auto rows = landscape_probe(bowl, grid, rhos);
    REQUIRE(rows.size() == 1);
    // max over the disc of radius 0.1 is on the stiff axis: 4*(0.1)^2
    CHECK(rows[0].perturbed_loss == doctest::Approx(0.04).epsilon(1e-4));
    CHECK(rows[0].sigma == doctest::Approx(8.0).epsilon(1e-4));
}

TEST_CASE("probe rejects empty grids and bad radii") {
    auto f = [](double x) { return x; };
    std::vector<double> empty;
    std::vector<double> rhos = {0.1};
    CHECK_THROWS_AS(landscape_probe(f, empty, rhos), ContractError);
    std::vector<double> grid = {0.0};
    std::vector<double> bad_rho = {0.0};
    CHECK_THROWS_AS(landscape_probe(f, grid, bad_rho), ContractError);
}

TEST_SUITE_END();
