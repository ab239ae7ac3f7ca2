#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "posekit/binning.hpp"

using namespace posekit;

TEST_CASE("effective widths reproduce the comparability table") {
    // n bins with per-side overlap vs the equivalent plain bin count
    REQUIRE(make_binspec(9, 2.5, 360, true).effective_width() == Catch::Approx(45.0));
    REQUIRE(make_binspec(5, 9.0, 360, true).effective_width() == Catch::Approx(90.0));
    REQUIRE(make_binspec(25, 0.3, 360, true).effective_width() == Catch::Approx(15.0));
    const double w13 = make_binspec(13, 1.15, 360, true).effective_width();
    REQUIRE(std::round(w13 * 100.0) / 100.0 == Catch::Approx(29.99));
}

TEST_CASE("even or tiny bin counts are rejected") {
    REQUIRE_THROWS_AS(make_binspec(8, 2.5, 360, true), ConfigError);
    REQUIRE_THROWS_AS(make_binspec(1, 0.0, 360, true), ConfigError);
    REQUIRE_THROWS_AS(make_binspec(9, -1.0, 360, true), ConfigError);
    REQUIRE_THROWS_AS(make_binspec(9, 25.0, 360, true), ConfigError); // >= half width
}

TEST_CASE("azimuth assignment with wraparound") {
    const BinSpec az = make_binspec(9, 2.5, 360, true);
    REQUIRE(az.center(0) == 0.0);
    REQUIRE(az.center(2) == Catch::Approx(80.0));
    REQUIRE(assign_bin(0.0, az) == 0);
    REQUIRE(assign_bin(359.0, az) == 0); // 1 degree from center 0 across the wrap
    REQUIRE(assign_bin(90.0, az) == 2);  // 10 deg from center 80, 30 from 120
    REQUIRE(assign_bin(380.0, az) == 0); // pre-wrap modulo 360
    // tie at the midpoint goes to the lower index
    REQUIRE(assign_bin(20.0, az) == 0);
}

TEST_CASE("elevation bins tile the range with half-offset centers") {
    const BinSpec el = make_binspec(5, 0.0, 90, false);
    REQUIRE(el.center(0) == Catch::Approx(9.0));
    REQUIRE(el.center(4) == Catch::Approx(81.0));
    REQUIRE(assign_bin(0.0, el) == 0);
    REQUIRE(assign_bin(90.0, el) == 4);
    REQUIRE(assign_bin(44.9, el) == 2);

    int warnings = 0;
    REQUIRE(assign_bin(95.0, el, &warnings) == 4); // clamped
    REQUIRE(assign_bin(-3.0, el, &warnings) == 0);
    REQUIRE(warnings == 2);
}

TEST_CASE("is_correct implements the overlap-extended interval") {
    const BinSpec az = make_binspec(9, 2.5, 360, true);
    REQUIRE(is_correct(0, 22.0, az));        // inside 20 + 2.5
    REQUIRE_FALSE(is_correct(0, 23.0, az));  // outside
    REQUIRE(is_correct(0, 338.0, az));       // wraps the other way
    REQUIRE_FALSE(is_correct(0, 337.0, az));
    REQUIRE_THROWS_AS(is_correct(9, 0.0, az), ConfigError);
}

TEST_CASE("assign_bin hits every center and containment holds on a fine grid") {
    for (const BinSpec& spec :
         {make_binspec(9, 2.5, 360, true), make_binspec(5, 9.0, 360, true),
          make_binspec(13, 1.15, 360, true), make_binspec(25, 0.3, 360, true),
          make_binspec(5, 0.0, 90, false), make_binspec(3, 0.0, 90, false),
          make_binspec(7, 0.0, 90, false)}) {
        for (int k = 0; k < spec.n_bins; ++k) REQUIRE(assign_bin(spec.center(k), spec) == k);
        for (double a = 0.0; a <= spec.range_deg + 1e-9; a += 0.1) {
            const int bin = assign_bin(a, spec);
            REQUIRE(is_correct(bin, a, spec));
        }
    }
}

TEST_CASE("coverage: every angle in >=1 bin, overlap regions in exactly 2") {
    const BinSpec az = make_binspec(9, 2.5, 360, true);
    const double nominal = az.nominal_width();
    auto coverage = [&](double a) {
        int covered = 0;
        for (int k = 0; k < az.n_bins; ++k) covered += is_correct(k, a, az) ? 1 : 0;
        return covered;
    };
    for (int i = 0; i < 36000; ++i) {
        const double a = i * 0.01;
        const int covered = coverage(a);
        REQUIRE(covered >= 1);
        REQUIRE(covered <= 2);
        // away from the exact overlap edges the count is fully determined
        const double rel = std::fmod(a + nominal / 2.0, nominal);
        const double to_boundary = std::min(rel, nominal - rel);
        if (std::abs(to_boundary - az.overlap_deg) > 1e-6) {
            const int expect = to_boundary < az.overlap_deg ? 2 : 1;
            INFO("angle " << a << " covered " << covered);
            REQUIRE(covered == expect);
        }
    }
    // nominal boundaries sit at 20 + k*40; the doubly-covered band is +-2.5
    REQUIRE(coverage(0.0) == 1);
    REQUIRE(coverage(16.0) == 1);
    REQUIRE(coverage(19.0) == 2);
    REQUIRE(coverage(22.0) == 2);
    REQUIRE(coverage(23.0) == 1);

    const BinSpec el = make_binspec(5, 0.0, 90, false);
    for (int i = 0; i < 900; ++i) {
        const double a = 0.05 + i * 0.1;
        int covered = 0;
        for (int k = 0; k < el.n_bins; ++k) covered += is_correct(k, a, el) ? 1 : 0;
        REQUIRE(covered >= 1);
    }
}
