#include "cavityqed/laplace.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace cavityqed;

namespace {

using one = std::array<cplx, 1>;

} // namespace

TEST(InverseLaplace, SimplePole) {
    for (double a : {0.5, 2.0}) {
        const auto F = [a](cplx s) { return one{1.0 / (s + a)}; };
        // 1/(s+a) = sum a^n / (s+2a)^{n+1}; three terms leave an s^-4 remainder
        const pole_series<1> asym{2.0 * a, {one{1.0}, one{a}, one{a * a}}};
        const std::size_t nt = 401;
        const double dt = 10.0 / a / (nt - 1);
        const auto r = inverse_laplace<1>(F, asym, dt, nt, {.omega_half_width = 10.0 * a});
        double err = 0;
        for (std::size_t n = 0; n < nt; ++n) err = std::max(err, std::abs(r.values[n][0] - std::exp(-a * n * dt)));
        EXPECT_LT(err, 1e-6) << "a " << a;
        EXPECT_LE(r.edge_ratio, 1e-8);
        EXPECT_LE(r.certify_change, 1e-4);
    }
}

TEST(InverseLaplace, DoublePole) {
    const double a = 1.0;
    const auto F = [a](cplx s) { return one{1.0 / ((s + a) * (s + a))}; };
    const pole_series<1> asym{2.0 * a, {one{0.0}, one{1.0}, one{2.0 * a}, one{3.0 * a * a}}};
    const std::size_t nt = 501;
    const double dt = 10.0 / (nt - 1);
    const auto r = inverse_laplace<1>(F, asym, dt, nt);
    double err = 0;
    for (std::size_t n = 0; n < nt; ++n) {
        const double t = n * dt;
        err = std::max(err, std::abs(r.values[n][0] - t * std::exp(-a * t)));
    }
    EXPECT_LT(err, 1e-6);
}

TEST(InverseLaplace, PoleSeriesIsInvertedExactly) {
    // F equal to its own asymptote: the remainder vanishes identically
    const pole_series<2> p{cplx(0.3, 1.0), {{cplx(1.0), cplx(0.0, 2.0)}, {cplx(-0.5), cplx(0.1)}}};
    const auto F = [&](cplx s) { return p.laplace(s); };
    const auto r = inverse_laplace<2>(F, p, 0.01, 300);
    for (std::size_t n = 0; n < 300; ++n) {
        const double t = n * 0.01;
        const auto e = std::exp(-p.a * t);
        EXPECT_NEAR(std::abs(r.values[n][0] - (1.0 - 0.5 * t) * e), 0.0, 1e-14);
        EXPECT_NEAR(std::abs(r.values[n][1] - (cplx(0.0, 2.0) + 0.1 * t) * e), 0.0, 1e-14);
    }
}

TEST(InverseLaplace, DelayedExponentialOnset) {
    const double a = 1.0, tau = 2.5, dt = 0.01;
    const std::size_t nt = 801;
    const auto F = [&](cplx s) { return one{std::exp(-s * tau) / (s + a)}; };
    // a jump has an s^-1 spectrum, so the window needs a smooth filter
    bromwich_options opt;
    opt.filter_width = 0.5 / dt;
    opt.filter_order = 2;
    opt.omega_half_width = opt.filter_width;
    const auto r = inverse_laplace<1>(F, pole_series<1>{}, dt, nt, opt);
    std::size_t onset = nt;
    for (std::size_t n = 0; n < nt && onset == nt; ++n)
        if (std::abs(r.values[n][0]) >= 0.5) onset = n;
    EXPECT_LE(std::abs(onset * dt - tau), dt + 1e-12);
    for (std::size_t n = 0; n * dt < tau - 0.5; ++n) EXPECT_LT(std::abs(r.values[n][0]), 1e-3);
    for (double t : {3.5, 5.0, 7.0}) {
        const auto n = static_cast<std::size_t>(std::lround(t / dt));
        EXPECT_NEAR(r.values[n][0].real(), std::exp(-a * (t - tau)), 1e-3) << t;
    }
}

TEST(InverseLaplace, EdgeFailureIsReported) {
    // an s^-1 spectrum never decays below the edge tolerance
    const auto F = [](cplx s) { return one{1.0 / (s + 1.0)}; };
    bromwich_options opt;
    opt.max_samples = 1 << 16;
    EXPECT_THROW((void)inverse_laplace<1>(F, pole_series<1>{}, 0.01, 100, opt), convergence_error);
}
