#include "cavityqed/wkb.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>

using namespace cavityqed;

TEST(Wkb, AngularConditionIsExactInSphericalLimit) {
    for (int n = 1; n <= 10; ++n) EXPECT_NEAR(wkb::angular_eigenvalue(0.0, n), n * (n + 1.0), 1e-8 * n * n);
}

TEST(Wkb, AngularEigenvaluesTrackExpansion) {
    for (double c : {5.0, 20.0})
        for (int n : {3, 8, 15}) {
            const double exact = prolate::eigenvalue(c, n);
            EXPECT_NEAR(wkb::angular_eigenvalue(c, n), exact, 0.02 * exact) << c << " " << n;
        }
}

class WkbVersusExact : public ::testing::TestWithParam<int> {};

TEST_P(WkbVersusExact, FrequenciesCountsAndNormalization) {
    const bool ellipsoid = GetParam() == 0;
    const cavity_spec cav = ellipsoid ? cavity_spec{prolate_ellipsoid{2.0, 3.0}} : cavity_spec{parabolic{1.0, 40.0}};
    const double lo = 10.0, hi = ellipsoid ? 11.0 : 10.5;
    const auto exact = quantize_exact(cav, {}, lo, hi);
    const auto semi = quantize_wkb(cav, {}, lo, hi);
    ASSERT_FALSE(exact.modes.empty());
    std::map<int, int> ce, cw;
    for (const auto& m : exact.modes) ++ce[m.channel];
    for (const auto& m : semi.modes) ++cw[m.channel];
    for (const auto& [ch, n] : cw) EXPECT_LE(std::abs(ce[ch] - n), 1) << "channel " << ch;
    double gmax = 0;
    for (const auto& m : exact.modes) gmax = std::max(gmax, std::abs(m.gz_focus[0]));
    const auto pairs = wkb::match(semi, exact);
    ASSERT_GT(pairs.size(), exact.modes.size() / 2);
    int frequencies = 0, norms = 0;
    for (const auto& p : pairs) {
        if (p.exact->longitudinal >= 5) {
            EXPECT_LE(p.relative_frequency_error(), 0.02) << p.exact->channel << "/" << p.exact->longitudinal;
            ++frequencies;
        }
        // dominant modes: the focus lies well inside the classically allowed region
        if (std::abs(p.exact->gz_focus[0]) >= 0.6 * gmax) {
            EXPECT_NEAR(p.wkb->normalization / p.exact->normalization, 1.0, 0.03)
                << p.exact->channel << "/" << p.exact->longitudinal;
            ++norms;
        }
    }
    EXPECT_GT(frequencies, 10);
    EXPECT_GE(norms, 3);
}

INSTANTIATE_TEST_SUITE_P(Cavities, WkbVersusExact, ::testing::Values(0, 1));

TEST(Wkb, FrequenciesScaleInverselyWithSize) {
    const cavity_spec cav = prolate_ellipsoid{2.0, 1.0};
    const auto a = quantize_wkb(cav, {}, 6.0, 8.0);
    const auto b = quantize_wkb(cav.scaled(2.0), {}, 3.0, 4.0);
    ASSERT_EQ(a.modes.size(), b.modes.size());
    for (std::size_t i = 0; i < a.modes.size(); ++i) EXPECT_NEAR(a.modes[i].omega, 2.0 * b.modes[i].omega, 1e-8 * a.modes[i].omega);
}
