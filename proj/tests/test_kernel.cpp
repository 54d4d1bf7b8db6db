#include "cavityqed/kernel.hpp"

#include <gsl/gsl_sf_expint.h>
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace cavityqed;

namespace {

cavity_spec any_cavity() { return cavity_spec(prolate_ellipsoid{1.0, 1.0}); }

// Transverse plane waves in a periodic box of side L: kappa^2 = omega D^2 sin^2(theta) / (2 V)
// summed over both polarizations. Returned as a synthetic basis with g_z = sin(theta) / sqrt(V).
mode_basis box_continuum(double omega0, double half_width, double L) {
    const double dk = 2.0 * std::numbers::pi / L;
    const int nmax = static_cast<int>(std::ceil((omega0 + half_width) / dk));
    std::vector<std::pair<double, double>> modes;
    for (int i = -nmax; i <= nmax; ++i)
        for (int j = -nmax; j <= nmax; ++j)
            for (int l = -nmax; l <= nmax; ++l) {
                const double k = dk * std::sqrt(double(i * i + j * j + l * l));
                if (std::abs(k - omega0) > half_width) continue;
                const double kz = dk * l;
                modes.emplace_back(k, std::sqrt((1.0 - kz * kz / (k * k)) / (L * L * L)));
            }
    std::sort(modes.begin(), modes.end());
    std::vector<double> w, g;
    for (auto& [a, b] : modes) {
        w.push_back(a);
        g.push_back(b);
    }
    auto basis = synthetic_basis(any_cavity(), {}, w, g, g);
    basis.omega_min = omega0 - half_width;
    basis.omega_max = omega0 + half_width;
    return basis;
}

} // namespace

TEST(GammaFree, UnitValueAndScaling) {
    const physical_constants pc;
    EXPECT_NEAR(gamma_free(1.0, 1.0, pc), 1.0 / (3.0 * std::numbers::pi), 1e-15);
    EXPECT_NEAR(gamma_free(2.0, 1.0, pc) / gamma_free(1.0, 1.0, pc), 8.0, 1e-12);
    EXPECT_NEAR(gamma_free(1.0, 3.0, pc) / gamma_free(1.0, 1.0, pc), 9.0, 1e-12);
    EXPECT_THROW((void)gamma_free(0.0, 1.0, pc), domain_error);
}

TEST(GammaFree, BoxContinuumOracle) {
    for (double omega0 : {1.0, 2.0}) {
        const auto basis = box_continuum(omega0, 0.15 * omega0, 160.0 / omega0);
        const kernel_matrix km(basis, {atom_spec{1, omega0, 1.0}});
        const auto r = purcell_pole(km, 0, 0.01 * omega0);
        EXPECT_NEAR(r.gamma / km.gamma_free(), 1.0, 0.02) << "omega " << omega0;
        // dissipative part of T1 at resonance, truncated sum plus its tail estimate
        const auto t = km.T1(0, 0, cplx(0.01 * omega0, -omega0));
        EXPECT_LE(std::abs(t.value.real() + t.tail), 0.05 * km.gamma_free() / 2.0);
    }
}

TEST(Kernel, SingleModeArithmetic) {
    const std::vector<double> w{1.0}, g{1.0};
    const auto basis = synthetic_basis(any_cavity(), {}, w, g, g);
    const kernel_matrix km(basis, {atom_spec{1, 1.0, 1.0}, atom_spec{2, 1.0, 1.0}});
    const auto a = km.A(0, 1, cplx(1.0, 0.0)).value;
    EXPECT_NEAR(a.real(), 0.25, 1e-15);
    EXPECT_NEAR(a.imag(), -0.25, 1e-15);
    EXPECT_EQ(km.T1(0, 1, 1.0).value, a);
    EXPECT_THROW((void)km.A(0, 0, cplx(0.0, -1.0)), domain_error);
    // single resonant mode: 2 kappa^2 / eps
    for (double eps : {0.1, 0.01}) EXPECT_NEAR(purcell_pole(km, 0, eps).gamma, 2.0 * 0.5 / eps, 1e-9 / eps);
}

TEST(Kernel, SymmetryPositivityDecay) {
    std::vector<double> w, g1, g2;
    for (int j = 0; j < 200; ++j) {
        w.push_back(5.0 + 0.013 * j + 0.004 * std::sin(j));
        g1.push_back(std::cos(0.7 * j));
        g2.push_back(j % 2 ? -g1.back() : g1.back());
    }
    const auto basis = synthetic_basis(any_cavity(), {}, w, g1, g2);
    const kernel_matrix km(basis, {atom_spec{1, 6.0, 0.3}, atom_spec{2, 6.0, 0.3}});
    for (double nu : {4.9, 5.5, 6.2, 7.6}) {
        const cplx s(0.02, -nu);
        EXPECT_EQ(km.A(0, 1, s).value, km.A(1, 0, s).value);
        EXPECT_EQ(km.T1(0, 1, s).value, km.T1(1, 0, s).value);
        EXPECT_GT(km.A(0, 0, s).value.real(), 0.0);
        // real couplings: conj A(s) = -A(-conj s)
        EXPECT_LT(std::abs(km.A(0, 1, -std::conj(s)).value + std::conj(km.A(0, 1, s).value)), 1e-12);
    }
    double total = 0;
    for (std::size_t j = 0; j < km.modes(); ++j) total += km.kappa(0)[j] * km.kappa(0)[j];
    for (double re : {1e3, 1e5}) EXPECT_NEAR(std::abs(km.A(0, 0, re).value) * re / total, 1.0, 20.0 / re);
}

TEST(SIntegral, TaylorAndCosineIntegral) {
    EXPECT_EQ(S_integral(0.0), 0.0);
    // sin^2(y) / y = y - y^3 / 3 + ...
    for (double u : {1e-5, 1e-4, 1e-3}) EXPECT_NEAR(S_integral(u) / (u * u / 2.0), 1.0, 1e-6);
    constexpr double euler = 0.57721566490153286061;
    for (double u : {1.0, 5.0, 10.0}) {
        const double identity = 0.5 * (std::log(2.0 * u) + euler - gsl_sf_Ci(2.0 * u));
        EXPECT_NEAR(S_integral(u), identity, 1e-9) << u;
    }
    EXPECT_NEAR(S_integral(300.0), 0.5 * (std::log(600.0) + euler - gsl_sf_Ci(600.0)), 1e-9);
    EXPECT_THROW((void)S_integral(-1.0), domain_error);
}

TEST(SemiclassicalPurcell, LimitsAndDecay) {
    EXPECT_THROW((void)purcell_parabolic_semiclassical(0.0), domain_error);
    // S grows like log(2u) / 2, so the approach to 1 is algebraic in u
    double prev_dev = 1.0;
    for (double u : {1e1 + 0.3, 1e2 + 0.3, 1e3 + 0.3, 1e4 + 0.3}) {
        const double dev = std::abs(purcell_parabolic_semiclassical(u).ratio - 1.0);
        EXPECT_LT(dev, prev_dev);
        prev_dev = dev;
    }
    EXPECT_LT(prev_dev, 1e-6);
    double prev_amp = 1e9;
    for (double u0 : {2.0, 5.0, 10.0, 20.0}) {
        double lo = 1e9, hi = -1e9;
        for (int i = 0; i < 200; ++i) {
            const double r = purcell_parabolic_semiclassical(u0 + std::numbers::pi * i / 200.0).ratio;
            lo = std::min(lo, r);
            hi = std::max(hi, r);
        }
        EXPECT_LT(lo, 1.0);
        EXPECT_GT(hi, 1.0);
        EXPECT_LT(hi - lo, prev_amp);
        prev_amp = hi - lo;
    }
    // term envelope decays like exp(-4 M S) up to polynomial factors
    for (double u : {0.5, 3.0}) {
        const double S = S_integral(u);
        double prev = purcell_parabolic_semiclassical(u, 1).ratio;
        for (int M = 2; M <= 8; ++M) {
            const double cur = purcell_parabolic_semiclassical(u, M).ratio;
            const double x = 2.0 * M * S;
            EXPECT_LE(std::abs(cur - prev), 6.0 * (x + 1.0) * 4.0 * std::exp(-2.0 * x) * 1.0001);
            prev = cur;
        }
        const auto full = purcell_parabolic_semiclassical(u);
        EXPECT_LT(full.last_term, 1e-10 * std::abs(full.ratio) * 10.0);
    }
}
