#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fraclab/kernels.hpp"

#include <cmath>
#include <random>

using namespace fraclab;

namespace {

// independent scalar oracle, branchy on purpose so that sign handling is
// exercised through a different code path than the library's pow-based one
double J_oracle(double x, double p) {
    if (x > 0.0) return std::pow(x, p - 1.0);
    if (x < 0.0) return -std::pow(-x, p - 1.0);
    return 0.0;
}
double V_oracle(double x, double p) {
    if (x > 0.0) return std::pow(x, 0.5 * p);
    if (x < 0.0) return -std::pow(-x, 0.5 * p);
    return 0.0;
}

struct OracleSides {
    double lhs, rhs;
};
OracleSides oracle_down(double a, double b, double p) {
    const double lhs = (J_oracle(a, p) - J_oracle(b, p)) * (a - b);
    const double rhs = (p - 1.0) * (2.0 / p) * (2.0 / p) * std::pow(std::abs(a - b), p);
    return {lhs, rhs};
}

} // namespace

TEST_CASE("parameter invariants are enforced with quoted constraints") {
    FractionalParams par{1, 0.5, 2.0, 0.0, 1.0};
    CHECK_NOTHROW(par.validate());
    par.s = 1.2;
    CHECK_THROWS_WITH_AS(par.validate(), doctest::Contains("s must lie in (0,1)"),
                         std::invalid_argument);
    par.s = 0.5;
    par.t = 0.7;
    CHECK_THROWS_WITH_AS(par.validate(), doctest::Contains("t <= s"),
                         std::invalid_argument);
    par.t = 0.0;
    par.p = 1.5;
    CHECK_THROWS_AS(par.validate(), std::invalid_argument);
    par.p = 2.0;
    par.lambda = 0.5;
    CHECK_THROWS_AS(par.validate(), std::invalid_argument);
}

TEST_CASE("standard kernel is the pure power and is even") {
    const Kernel k1 = standard_kernel({1, 0.5, 2.0, 0.0, 1.0});
    CHECK(k1({2.0, 0.0}) == doctest::Approx(4.0)); // 2^{1+1}
    const Kernel k2 = standard_kernel({2, 0.5, 2.0, 0.0, 1.0});
    CHECK(k2({1.0, 0.0}) == doctest::Approx(1.0));
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int i = 0; i < 100; ++i) {
        const Point z{u(rng), u(rng)};
        CHECK(k2(z) == doctest::Approx(k2({-z[0], -z[1]})));
    }
}

TEST_CASE("modulated kernels respect the ellipticity sandwich") {
    const FractionalParams par{2, 0.5, 2.0, 0.0, 2.0};
    const Kernel kr = modulated_kernel(par, ModulationTag::RadialStep);
    CHECK(kr({0.5, 0.0}) == doctest::Approx(2.0 * std::pow(0.5, 3.0))); // N + sp = 3
    CHECK(kr({2.0, 0.0}) == doctest::Approx(0.5 * std::pow(2.0, 3.0)));

    const Kernel ka = modulated_kernel(par, ModulationTag::Angular);
    const auto rep = kernel_bounds_check(ka, 2048);
    CHECK(rep.ok);
    CHECK(rep.worst_ratio <= 2.0 + 1e-12);

    // Lambda = 1 angular degenerates to the standard kernel in any dimension
    const FractionalParams p1{1, 0.5, 2.0, 0.0, 1.0};
    const Kernel kd = modulated_kernel(p1, ModulationTag::Angular);
    CHECK(kd({0.7, 0.0}) == doctest::Approx(std::pow(0.7, 2.0)));

    // no angle in 1D
    const FractionalParams p2{1, 0.5, 2.0, 0.0, 2.0};
    CHECK_THROWS_AS(modulated_kernel(p2, ModulationTag::Angular), std::invalid_argument);
}

TEST_CASE("kernel_bounds_check verdicts") {
    const FractionalParams par{1, 0.5, 2.0, 0.0, 1.0};
    const auto std_rep = kernel_bounds_check(standard_kernel(par), 512);
    CHECK(std_rep.ok);
    CHECK(std_rep.worst_ratio == doctest::Approx(1.0).epsilon(1e-12));

    const FractionalParams par2{1, 0.5, 2.0, 0.0, 2.0};
    const auto step_rep =
        kernel_bounds_check(modulated_kernel(par2, ModulationTag::RadialStep), 512);
    CHECK(step_rep.ok);
    CHECK(step_rep.worst_ratio == doctest::Approx(2.0));

    // adversarial modulation outside the sandwich must be flagged
    const Kernel bad = custom_kernel(par2, [](const Point&, int) { return 3.0; });
    const auto bad_rep = kernel_bounds_check(bad, 512);
    CHECK_FALSE(bad_rep.ok);
    CHECK(bad_rep.worst_ratio == doctest::Approx(3.0));
}

TEST_CASE("jp and vp match their definitions") {
    CHECK(jp(2.0, 3.0) == doctest::Approx(4.0));
    CHECK(vp(-2.0, 4.0) == doctest::Approx(-4.0));
    CHECK(jp(0.0, 2.5) == 0.0);
    CHECK(vp(0.0, 2.5) == 0.0);
}

TEST_CASE("jp and vp are odd and satisfy jp(x) x = vp(x)^2") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    for (double p : {2.0, 2.5, 3.0, 4.0}) {
        for (int i = 0; i < 2000; ++i) {
            const double x = u(rng);
            CHECK(jp(-x, p) == doctest::Approx(-jp(x, p)).epsilon(1e-14));
            CHECK(vp(-x, p) == doctest::Approx(-vp(x, p)).epsilon(1e-14));
            const double lhs = jp(x, p) * x;
            const double rhs = vp(x, p) * vp(x, p);
            CHECK(lhs == doctest::Approx(rhs).epsilon(1e-13));
            CHECK(jp(x, p) == doctest::Approx(J_oracle(x, p)).epsilon(1e-14));
            CHECK(vp(x, p) == doctest::Approx(V_oracle(x, p)).epsilon(1e-14));
        }
    }
}

TEST_CASE("calibration pair (1,-1) at p=4: oracle fixes both sides") {
    // scalar oracle first: J_4(1) = 1, J_4(-1) = -1, so the product side is 4
    CHECK(J_oracle(1.0, 4.0) == doctest::Approx(1.0));
    CHECK(J_oracle(-1.0, 4.0) == doctest::Approx(-1.0));
    const auto sides = oracle_down(1.0, -1.0, 4.0);
    CHECK(sides.lhs == doctest::Approx(4.0));
    CHECK(sides.rhs == doctest::Approx(12.0)); // 3 * (2/4)^2 * 2^4
    // with these values the printed inequality is violated at this pair, and
    // the checker must report it rather than pass
    const auto rep = verify_pointwise_inequalities({4.0}, 20000, 123);
    bool down_flagged = false, holder_flagged = false;
    for (const auto& row : rep.rows) {
        if (row.name == "down") down_flagged = !row.ok;
        if (row.name == "holder") holder_flagged = !row.ok;
    }
    CHECK(down_flagged);
    CHECK(holder_flagged);
}

TEST_CASE("monotone and lipschitz hold on random pairs for every p") {
    const auto rep = verify_pointwise_inequalities({2.0, 2.5, 3.0, 4.0}, 20000, 2024);
    for (const auto& row : rep.rows) {
        if (row.name == "monotone" || row.name == "lipschitz") {
            INFO(row.name, " p=", row.p, " worst=", row.worst_rel_slack, " at (",
                 row.worst_a, ",", row.worst_b, ")");
            CHECK(row.ok);
        }
    }
}

TEST_CASE("p=2 is the equality case for the product bounds") {
    const auto rep = verify_pointwise_inequalities({2.0}, 20000, 5);
    for (const auto& row : rep.rows) {
        CHECK(row.ok);
        if (row.name == "monotone" || row.name == "down")
            CHECK(row.max_rel_gap <= 1e-12);
    }
}

TEST_CASE("product bounds with the extra factor 2^{2-p} hold for all p") {
    // the unit-constant forms fail on sign-straddling pairs; with the sharp
    // factor both become true inequalities with equality at a = -b
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    for (double p : {2.0, 2.5, 3.0, 4.0}) {
        const double sharp = std::pow(2.0, 2.0 - p);
        double worst_holder = 0.0, worst_down = 0.0;
        for (int i = 0; i < 50000; ++i) {
            const double a = u(rng), b = u(rng);
            const double m = std::max(std::abs(a), std::abs(b));
            const double scale = std::pow(m, p) + 1e-300;
            const double dv = V_oracle(a, p) - V_oracle(b, p);
            const double holder_slack =
                (dv * dv - sharp * std::pow(std::abs(a - b), p)) / scale;
            const double down_slack =
                ((J_oracle(a, p) - J_oracle(b, p)) * (a - b) -
                 (p - 1.0) * (2.0 / p) * (2.0 / p) * sharp * std::pow(std::abs(a - b), p)) /
                scale;
            worst_holder = std::min(worst_holder, holder_slack);
            worst_down = std::min(worst_down, down_slack);
        }
        CHECK(worst_holder >= -1e-12);
        CHECK(worst_down >= -1e-12);
        // equality at a = -b for the corrected two-point bound
        const double a = 1.7, b = -1.7;
        const double dv = V_oracle(a, p) - V_oracle(b, p);
        CHECK(dv * dv ==
              doctest::Approx(sharp * std::pow(std::abs(a - b), p)).epsilon(1e-12));
    }
}

TEST_CASE("violating pairs are reported verbatim") {
    const auto rep = verify_pointwise_inequalities({3.0}, 50000, 99);
    for (const auto& row : rep.rows) {
        if (!row.ok) {
            // re-evaluate the reported pair with the oracle: it must violate
            const auto sides = oracle_down(row.worst_a, row.worst_b, row.p);
            if (row.name == "down") CHECK(sides.lhs < sides.rhs);
            CHECK(std::abs(row.worst_a) <= 10.0);
            CHECK(std::abs(row.worst_b) <= 10.0);
        }
    }
}

TEST_CASE("angular modulation is even") {
    const FractionalParams par{2, 0.5, 2.0, 0.0, 3.0};
    const Kernel k = modulated_kernel(par, ModulationTag::Angular);
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int i = 0; i < 500; ++i) {
        const Point z{u(rng), u(rng)};
        CHECK(k.modulation(z) == doctest::Approx(k.modulation({-z[0], -z[1]})).epsilon(1e-13));
    }
}
