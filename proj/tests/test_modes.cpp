#include "cavityqed/modes.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>
#include <gsl/gsl_sf_bessel.h>
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace cavityqed;
using std::numbers::pi;

namespace {

// Zeros of x j0(x) - j1(x), the TM_1 condition (r j1(kr))' = 0 on a sphere.
std::vector<double> sphere_tm1_roots(double x_max) {
    auto f = [](double x) { return x * gsl_sf_bessel_j0(x) - gsl_sf_bessel_j1(x); };
    std::vector<double> roots;
    const double h = 0.01;
    for (double x = 0.5; x + h < x_max; x += h) {
        if ((f(x) > 0) != (f(x + h) > 0)) {
            std::uintmax_t it = 100;
            auto [a, b] = boost::math::tools::toms748_solve(
                f, x, x + h, boost::math::tools::eps_tolerance<double>(50), it);
            roots.push_back(0.5 * (a + b));
        }
    }
    return roots;
}

double sphere_coupling_sq(double k, double a) {
    const double I = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        [&](double r) { return std::pow(gsl_sf_bessel_j1(k * r) * r, 2); }, 0.0, a, 15, 1e-14);
    return 1.0 / (6.0 * pi * I);
}

double psi_at(const cavity_spec& cav, const mode& m, double rho, double z) {
    const auto q = to_curvilinear({rho, 0.0, z}, cav);
    const double xi[1] = {q.xi}, eta[1] = {q.eta};
    const auto s = sample_factors(cav, m, xi, eta, shoot_options{1e-12, 1e-12, 1e-8});
    return rho * regular_from_samples(cav, m, s.first[0], s.d_first[0], s.second[0], s.d_second[0]).value;
}

// int |g|^2 dV from the electric field on a Gauss grid in (xi, eta).
double field_energy(const cavity_spec& cav, const mode& m) {
    constexpr int n = 60;
    using gauss = boost::math::quadrature::gauss<double, n>;
    const auto& nodes = gauss::abscissa();
    const auto& wts = gauss::weights();
    std::vector<double> gx, gw;
    auto push = [&](double a, double b, int panels) {
        for (int p = 0; p < panels; ++p) {
            const double lo = a + (b - a) * p / panels, hi = a + (b - a) * (p + 1) / panels;
            const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
            for (std::size_t i = 0; i < nodes.size(); ++i) {
                for (int s : {-1, 1}) {
                    if (nodes[i] == 0 && s < 0) continue;
                    gx.push_back(mid + s * half * nodes[i]);
                    gw.push_back(half * wts[i]);
                }
            }
        }
    };
    std::vector<double> xi, xw, eta, ew;
    if (cav.is_ellipsoid()) {
        push(1.0, cav.xi0(), 4);
        xi = gx; xw = gw; gx.clear(); gw.clear();
        push(-1.0, 1.0, 4);
    } else {
        push(0.0, cav.xi_cutoff(), 8);
        xi = gx; xw = gw; gx.clear(); gw.clear();
        push(0.0, cav.eta0(), 4);
    }
    eta = gx; ew = gw;
    const auto s = sample_factors(cav, m, xi, eta, shoot_options{1e-12, 1e-12, 1e-8});
    double total = 0;
    for (std::size_t i = 0; i < xi.size(); ++i) {
        for (std::size_t j = 0; j < eta.size(); ++j) {
            const auto q = cav.is_ellipsoid() ? make_prolate_point(xi[i], eta[j]) : make_parabolic_point(xi[i], eta[j]);
            const auto r = regular_from_samples(cav, m, s.first[i], s.d_first[i], s.second[j], s.d_second[j]);
            const auto e = field_from_regular(r, q, cav, m.k);
            double jac;
            if (cav.is_ellipsoid()) {
                const double c0 = cav.c0();
                jac = c0 * c0 * c0 * (xi[i] * xi[i] - eta[j] * eta[j]);
            } else {
                jac = 0.25 * (xi[i] + eta[j]);
            }
            total += xw[i] * ew[j] * jac * 2.0 * pi * (e.e_rho * e.e_rho + e.e_z * e.e_z);
        }
    }
    return total;
}

} // namespace

TEST(Modes, NearSphericalEllipsoidMatchesSphere) {
    const cavity_spec cav = prolate_ellipsoid{2e-4, 1.0 - 1e-4};
    const auto basis = quantize_exact(cav, {}, 1.0, 14.0);
    std::vector<mode> tm1;
    for (const auto& m : basis.modes)
        if (m.channel == 1) tm1.push_back(m);
    const auto roots = sphere_tm1_roots(14.0);
    ASSERT_EQ(tm1.size(), roots.size());
    for (std::size_t i = 0; i < roots.size(); ++i) {
        EXPECT_NEAR(tm1[i].k, roots[i], 1e-6 * roots[i]);
        EXPECT_EQ(tm1[i].longitudinal, static_cast<int>(i));
        const double g2 = tm1[i].gz_focus[0] * tm1[i].gz_focus[0];
        EXPECT_NEAR(g2, sphere_coupling_sq(roots[i], 1.0), 1e-5 * g2);
    }
    // higher channels barely reach the center
    for (const auto& m : basis.modes)
        if (m.channel > 1) EXPECT_LT(std::abs(m.gz_focus[0]), 1e-2 * std::abs(tm1[0].gz_focus[0]));
}

TEST(Modes, FieldEnergyMatchesNormalization) {
    for (const cavity_spec& cav : {cavity_spec{prolate_ellipsoid{2.0, 1.0}}, cavity_spec{parabolic{1.0, 12.0}}}) {
        const auto basis = quantize_exact(cav, {}, 2.0, 4.0);
        ASSERT_GE(basis.modes.size(), 3u);
        for (std::size_t i = 0; i < basis.modes.size(); i += std::max<std::size_t>(1, basis.modes.size() / 4)) {
            EXPECT_NEAR(field_energy(cav, basis.modes[i]), 1.0, 1e-7) << i;
        }
    }
}

TEST(Modes, FocalCouplingFromFieldEvaluation) {
    const cavity_spec cav = prolate_ellipsoid{2.0, 1.0};
    const auto basis = quantize_exact(cav, {}, 3.0, 5.0);
    for (const auto& m : basis.modes) {
        for (int f : {1, 2}) {
            const auto g = mode_field_at(m, cav, focus_position(cav, f));
            EXPECT_NEAR(g[2], m.gz_focus[f - 1], 1e-9 * std::max(1.0, std::abs(m.gz_focus[0])));
            // off-focus evaluation approaches the focal value
            auto p = focus_position(cav, f);
            p[0] += 1e-6;
            EXPECT_NEAR(mode_field_at(m, cav, p)[2], m.gz_focus[f - 1], 1e-5 * std::max(1.0, std::abs(m.gz_focus[0])));
        }
    }
}

TEST(Modes, HelmholtzResidualAndWallCondition) {
    for (const cavity_spec& cav : {cavity_spec{prolate_ellipsoid{2.0, 1.0}}, cavity_spec{parabolic{1.0, 12.0}}}) {
        const auto basis = quantize_exact(cav, {}, 4.0, 4.6);
        ASSERT_FALSE(basis.modes.empty());
        const auto& m = basis.modes.front();
        const double k = m.k, h = 1e-3;
        const double scale = k * k * std::abs(psi_at(cav, m, 0.3, 0.1)) + 1e-3;
        for (auto [rho, z] : {std::pair{0.4, 0.2}, std::pair{0.8, -0.5}, std::pair{0.2, 0.9}}) {
            if (!inside(cav, rho + 2 * h, z)) continue;
            const double c = psi_at(cav, m, rho, z);
            const double prr = (psi_at(cav, m, rho + h, z) - 2 * c + psi_at(cav, m, rho - h, z)) / (h * h);
            const double pr = (psi_at(cav, m, rho + h, z) - psi_at(cav, m, rho - h, z)) / (2 * h);
            const double pzz = (psi_at(cav, m, rho, z + h) - 2 * c + psi_at(cav, m, rho, z - h)) / (h * h);
            const double res = prr + pr / rho - c / (rho * rho) + pzz + k * k * c;
            EXPECT_LT(std::abs(res), 1e-3 * scale) << rho << "," << z;
        }
        // tangential E on the conducting wall
        double emax = 0, tmax = 0;
        for (int i = 1; i < 20; ++i) {
            const double t = static_cast<double>(i) / 20;
            curvilinear_point q;
            vec3 tangent_grad;
            if (cav.is_ellipsoid()) {
                q = make_prolate_point(cav.xi0(), 2 * t - 1);
            } else {
                q = make_parabolic_point(cav.xi_cutoff() * t, cav.eta0());
            }
            const auto g = gradients(q, cav);
            const auto p = from_curvilinear(q, cav);
            const auto e = mode_field_at(m, cav, p);
            const double tr = g.grad_xi.rho, tz = g.grad_xi.z;
            const double nrm = std::hypot(tr, tz);
            const double er = p[0] >= 0 ? e[0] : -e[0];
            (void)tangent_grad;
            if (cav.is_ellipsoid()) {
                // tangent of xi = xi0 is along grad eta
                const double ar = g.grad_eta.rho, az = g.grad_eta.z, an = std::hypot(ar, az);
                tmax = std::max(tmax, std::abs(er * ar + e[2] * az) / an);
            } else {
                tmax = std::max(tmax, std::abs(er * tr + e[2] * tz) / nrm);
            }
            emax = std::max(emax, std::hypot(e[0], e[2]));
        }
        EXPECT_LT(tmax, 1e-7 * emax);
    }
}

TEST(Modes, InvalidWindowRejected) {
    const cavity_spec cav = prolate_ellipsoid{2.0, 1.0};
    EXPECT_THROW((void)quantize_exact(cav, {}, 2.0, 1.0), domain_error);
    EXPECT_THROW((void)quantize_exact(cav, {}, 0.0, 1.0), domain_error);
}

TEST(Modes, ChannelNodeCountsMatchIndices) {
    const cavity_spec cav = parabolic{1.0, 20.0};
    const auto basis = quantize_exact(cav, {}, 3.0, 3.5);
    for (const auto& m : basis.modes) {
        const auto o = separated_odes(cav, m.k, m.separation);
        EXPECT_EQ(integrate(o.second).nodes, m.channel);
        EXPECT_EQ(integrate(o.first).nodes, m.longitudinal);
    }
}
