#pragma once

// Semiclassical (phase-integral) quantization.
//
// Each separated equation is brought to Liouville form R_tt + q(x) R = 0 with
// dt = dx / sigma(x) and a Langer-corrected q:
//
//   prolate eta: q = (lambda + 1/4 - c^2 eta^2)(1 - eta^2) - 1,  sigma = 1 - eta^2
//   prolate xi:  q = (c^2 xi^2 - lambda - 1/4)(xi^2 - 1) - 1,    sigma = xi^2 - 1
//   parabolic:   q = k^2 x^2 / 4 +- beta x - 1/4 (times 1/x^2),  sigma = 1
//
// with phase Phi = int sqrt(q) dt over the allowed region. The wall
// condition d(rho psi)/dn = 0 reads R_t + xi0 R = 0 (prolate) or R_t = 0
// (parabolic), giving
//
//   prolate eta: Phi = pi (n - 1/2)
//   prolate xi:  Phi = pi/4 + atan(xi0 / sqrt(q(xi0))) + j pi
//   parabolic:   Phi = pi/4 + j pi  (both coordinates)
//
// Norm integrals use the normal form u'' + K u = 0 in the physical
// coordinate, u ~ A K^(-1/4) cos(...), averaged over a period:
// int g u^2 dx = (A^2 / 2) int g K^(-1/2) dx. The amplitude A links the
// oscillatory region to the focal value and is read off the regular
// solution through the invariant A^2 = sqrt(K) u^2 + u'^2 / sqrt(K).

#include "cavityqed/modes.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

namespace cavityqed {

namespace wkb {

namespace detail {

template <class F>
double quad(F&& f, double a, double b) {
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 15, 1e-12);
}

// int_{xt}^{xe} f(x) dx for f with an inverse square root singularity at xt.
template <class F>
double from_turning_point(F&& f, double xt, double xe) {
    const double L = xe - xt;
    if (!(L > 0)) return 0.0;
    return quad([&](double s) { return s == 0.0 ? 0.0 : f(xt + L * s * s) * 2.0 * L * s; }, 0.0, 1.0);
}

// int_{-et}^{et} f(x) dx for even f with singular endpoints.
template <class F>
double symmetric_well(F&& f, double et) {
    return 2.0 * quad([&](double s) { return s == 0.0 ? 0.0 : f(et * (1.0 - s * s)) * 2.0 * et * s; }, 0.0, 1.0);
}

template <class F>
double solve_increasing(F&& f, double target, double lo, double hi) {
    double flo = f(lo) - target;
    double fhi = f(hi) - target;
    for (int i = 0; i < 200 && fhi < 0; ++i) {
        lo = hi;
        flo = fhi;
        hi = 2.0 * hi + 1.0;
        fhi = f(hi) - target;
    }
    for (int i = 0; i < 200 && flo > 0; ++i) {
        hi = lo;
        fhi = flo;
        lo = lo - 2.0 * std::abs(lo) - 1.0;
        flo = f(lo) - target;
    }
    if (flo > 0 || fhi < 0) throw convergence_error("wkb: turning-point classification failed (no bracket)");
    if (flo == 0) return lo;
    if (fhi == 0) return hi;
    std::uintmax_t it = 200;
    auto [a, b] = boost::math::tools::toms748_solve([&](double x) { return f(x) - target; }, lo, hi, flo, fhi,
                                                    boost::math::tools::eps_tolerance<double>(48), it);
    return 0.5 * (a + b);
}

} // namespace detail

// ---------------------------------------------------------------------------
// Prolate ellipsoid.

/// Outer angular turning point eta_t in (0, 1).
[[nodiscard]] inline double angular_turning_point(double c, double lambda) {
    const double A = lambda + 0.25;
    if (!(A > 1.0)) return 0.0;
    const double c2 = c * c;
    const double b = A + c2;
    const double disc = std::max(0.0, b * b - 4.0 * c2 * (A - 1.0));
    return std::sqrt(2.0 * (A - 1.0) / (b + std::sqrt(disc)));
}

[[nodiscard]] inline double angular_q(double c, double lambda, double eta) {
    return (lambda + 0.25 - c * c * eta * eta) * (1.0 - eta * eta) - 1.0;
}

[[nodiscard]] inline double angular_phase(double c, double lambda) {
    const double et = angular_turning_point(c, lambda);
    if (et == 0.0) return 0.0;
    return detail::symmetric_well(
        [&](double e) { return std::sqrt(std::max(0.0, angular_q(c, lambda, e))) / (1.0 - e * e); }, et);
}

/// Separation constant of channel n from the angular phase condition.
[[nodiscard]] inline double angular_eigenvalue(double c, int n) {
    if (n < 1) throw domain_error("prolate channel index starts at 1");
    const double target = std::numbers::pi * (n - 0.5);
    const double guess = std::max(2.0, n * (n + 1.0) + c * c * 0.5);
    return detail::solve_increasing([&](double l) { return angular_phase(c, l); }, target, 0.75,
                                    std::max(2.0, guess));
}

/// Inner radial turning point xi_t > 1.
[[nodiscard]] inline double radial_turning_point(double c, double lambda) {
    const double A = lambda + 0.25;
    const double c2 = c * c;
    const double b = A + c2;
    const double disc = std::max(0.0, b * b - 4.0 * c2 * (A - 1.0));
    return std::sqrt((b + std::sqrt(disc)) / (2.0 * c2));
}

[[nodiscard]] inline double radial_q(double c, double lambda, double xi) {
    return (c * c * xi * xi - lambda - 0.25) * (xi * xi - 1.0) - 1.0;
}

/// Radial quantization function: Phi - pi/4 - atan(xi0 / sqrt(q0)); modes at j pi.
[[nodiscard]] inline double radial_condition(double c, double lambda, double xi0) {
    const double xt = radial_turning_point(c, lambda);
    const double q0 = radial_q(c, lambda, xi0);
    if (!(xt < xi0) || !(q0 > 0)) return -0.75 * std::numbers::pi;
    const double phi = detail::from_turning_point(
        [&](double x) { return std::sqrt(std::max(0.0, radial_q(c, lambda, x))) / (x * x - 1.0); }, xt, xi0);
    return phi - 0.25 * std::numbers::pi - std::atan(xi0 / std::sqrt(q0));
}

// ---------------------------------------------------------------------------
// Parabola. sign = +1 for the xi factor, -1 for the eta factor.

[[nodiscard]] inline double parabolic_turning_point(double k, double beta, double sign) {
    const double b = sign * beta;
    const double r = std::sqrt(b * b + 0.25 * k * k);
    return b > 0 ? 1.0 / (2.0 * (r + b)) : (r - b) / (0.5 * k * k);
}

[[nodiscard]] inline double parabolic_q(double k, double beta, double sign, double x) {
    return 0.25 * k * k + sign * beta / x - 0.25 / (x * x);
}

[[nodiscard]] inline double parabolic_phase(double k, double beta, double sign, double wall) {
    const double xt = parabolic_turning_point(k, beta, sign);
    if (!(xt < wall)) return 0.0;
    return detail::from_turning_point(
        [&](double x) { return std::sqrt(std::max(0.0, parabolic_q(k, beta, sign, x))); }, xt, wall);
}

/// beta of channel j: the eta phase equals pi/4 + j pi (decreasing in beta).
[[nodiscard]] inline double parabolic_channel_beta(double k, double eta0, int j) {
    const double target = 0.25 * std::numbers::pi + j * std::numbers::pi;
    // phase increases with -beta
    const double b = detail::solve_increasing([&](double mb) { return parabolic_phase(k, -mb, -1.0, eta0); },
                                              target, -0.25 * k * k * eta0, 1.0);
    return -b;
}

// ---------------------------------------------------------------------------
// Normalization by the phase-space rule.

/// Normal form u'' + K(x) u = 0 of one separated factor, u = mu(x) y(x), in
/// the physical coordinate. K carries the same Langer correction as the
/// phase integrals, so the allowed regions coincide.
struct normal_form {
    std::function<double(double)> K;
    std::function<double(double)> mu;
    std::function<double(double)> dmu;
    double lower{0}, upper{0}; // allowed region
    bool symmetric{false};     // even well about 0, sampled on [0, upper]
};

/// WKB estimate of int w_k(x) y(x)^2 dx for the focus-normalized factor y
/// of `ode`; `to_ode` maps physical x to the ODE abscissa (slope +-1).
template <std::size_t N, class W>
std::array<double, N> phase_space_integrals(const separated_ode& ode, const normal_form& nf, W weights,
                                            double (*to_ode)(double), const shoot_options& opt) {
    std::array<double, N> out{};
    if (!(nf.upper > nf.lower)) return out;
    // amplitude from the regular solution, averaged over probes in the allowed region
    constexpr int probes = 64;
    const double lo = nf.symmetric ? 0.0 : nf.lower;
    std::vector<std::pair<double, double>> order;
    for (int i = 0; i < probes; ++i) {
        const double x = lo + (nf.upper - lo) * (0.15 + 0.8 * (i + 0.5) / probes);
        order.emplace_back(std::clamp(to_ode(x), 0.0, ode.length), x);
    }
    std::sort(order.begin(), order.end());
    std::vector<double> sorted;
    for (const auto& p : order) sorted.push_back(p.first);
    const auto s = integrate(ode, cavityqed::detail::no_weights{}, sorted, opt);
    const double slope = to_ode(1.0) - to_ode(0.0);
    double a2 = 0;
    int used = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        const double x = order[i].second;
        const double K = nf.K(x);
        if (!(K > 0)) continue;
        const double y = s.sample_y[i];
        const double dy = s.sample_dy[i] * slope;
        const double u = nf.mu(x) * y;
        const double du = nf.mu(x) * dy + nf.dmu(x) * y;
        a2 += std::sqrt(K) * u * u + du * du / std::sqrt(K);
        ++used;
    }
    if (used == 0) throw convergence_error("wkb: no oscillatory probe for the amplitude");
    a2 /= used;
    for (std::size_t k = 0; k < N; ++k) {
        auto f = [&](double x) {
            const double K = nf.K(x);
            const double m = nf.mu(x);
            return K > 0 ? weights(x)[k] / (m * m * std::sqrt(K)) : 0.0;
        };
        const double I = nf.symmetric ? detail::symmetric_well(f, nf.upper) : detail::from_turning_point(f, nf.lower, nf.upper);
        out[k] = 0.5 * a2 * I;
    }
    return out;
}

/// Norm integrals of a mode by the semiclassical rule.
[[nodiscard]] inline norm_integrals semiclassical_norm_integrals(const cavity_spec& cav, const mode& m,
                                                                 const shoot_options& opt = {}) {
    const auto odes = separated_odes(cav, m.k, m.separation, m.parity());
    norm_integrals I;
    if (cav.is_ellipsoid()) {
        const double c = m.k * cav.c0();
        const double lam = m.separation;
        // u = (xi^2 - 1) P and u = (1 - eta^2) Q
        normal_form rad{[=](double x) { return radial_q(c, lam, x) / std::pow(x * x - 1.0, 2); },
                        [](double x) { return x * x - 1.0; }, [](double x) { return 2.0 * x; },
                        radial_turning_point(c, lam), cav.xi0(), false};
        const auto r = phase_space_integrals<2>(
            odes.first, rad, [](double x) { return std::array<double, 2>{x * x - 1.0, x * x * (x * x - 1.0)}; },
            +[](double x) { return x - 1.0; }, opt);
        normal_form ang{[=](double e) { return angular_q(c, lam, e) / std::pow(1.0 - e * e, 2); },
                        [](double e) { return 1.0 - e * e; }, [](double e) { return -2.0 * e; }, 0.0,
                        angular_turning_point(c, lam), true};
        const auto a = phase_space_integrals<2>(
            odes.second, ang, [](double e) { return std::array<double, 2>{1.0 - e * e, e * e * (1.0 - e * e)}; },
            +[](double e) { return 1.0 - e; }, opt);
        I = {r[0], r[1], a[0], a[1]};
    } else {
        const double k = m.k, beta = m.separation;
        // u = x U (or x V): u'' + (k^2/4 +- beta/x) u = 0
        auto make = [&](double sign, double wall) {
            return normal_form{[=](double x) { return parabolic_q(k, beta, sign, x); }, [](double x) { return x; },
                               [](double) { return 1.0; }, parabolic_turning_point(k, beta, sign), wall, false};
        };
        auto w = [](double x) { return std::array<double, 2>{x, x * x}; };
        const auto u = phase_space_integrals<2>(odes.first, make(1.0, cav.xi_cutoff()), w, +[](double x) { return x; }, opt);
        const auto v = phase_space_integrals<2>(odes.second, make(-1.0, cav.eta0()), w, +[](double x) { return x; }, opt);
        I = {u[0], u[1], v[0], v[1]};
    }
    return I;
}

// ---------------------------------------------------------------------------
// Quantization.

namespace detail {

template <class Phase>
std::vector<std::pair<int, double>> roots(Phase&& phase, double k_lo, double k_hi) {
    return cavityqed::detail::phase_roots(phase, 0.0, k_lo, k_hi, 1e-9);
}

} // namespace detail

[[nodiscard]] inline mode_basis quantize(const cavity_spec& cav, const physical_constants& pc, double omega_min,
                                         double omega_max, const quantize_options& opt = {}) {
    cav.validate();
    pc.validate();
    cavityqed::detail::check_window(omega_min, omega_max);
    const double k_lo = omega_min / pc.c, k_hi = omega_max / pc.c, k_mid = 0.5 * (k_lo + k_hi);
    mode_basis basis{cav, pc, {}, omega_min, omega_max, provenance::wkb, 0};

    auto finish = [&](mode m) {
        m.omega = m.k * pc.c;
        apply_normalization(m, cav, semiclassical_norm_integrals(cav, m, opt.shooting));
        basis.modes.push_back(m);
        if (basis.modes.size() > opt.max_modes) throw domain_error("quantize_wkb: window too wide (mode cap exceeded)");
    };
    auto coupling = [&](mode m) {
        apply_normalization(m, cav, semiclassical_norm_integrals(cav, m, opt.shooting));
        return m.gz_focus[0] * m.gz_focus[0];
    };

    if (cav.is_ellipsoid()) {
        const double c0 = cav.c0(), xi0 = cav.xi0();
        auto cond = [&](int n, double k) {
            return radial_condition(k * c0, angular_eigenvalue(k * c0, n), xi0);
        };
        std::vector<std::pair<int, double>> channels;
        double best = 0;
        for (int n = 1; n < 100000; ++n) {
            if (cond(n, k_hi) < 0) break;
            mode probe;
            probe.k = k_mid;
            probe.channel = n;
            probe.separation = angular_eigenvalue(k_mid * c0, n);
            const double w = cond(n, k_mid) > -0.7 * std::numbers::pi ? coupling(probe) : 0.0;
            channels.emplace_back(n, w);
            best = std::max(best, w);
        }
        for (const auto& [n, w] : channels) {
            if (w < opt.channel_cutoff * best) continue;
            ++basis.channels;
            for (const auto& [j, k] : detail::roots([&](double k) { return cond(n, k); }, k_lo, k_hi)) {
                mode m;
                m.k = k;
                m.channel = n;
                m.longitudinal = j;
                m.separation = angular_eigenvalue(k * c0, n);
                finish(m);
            }
        }
    } else {
        const double eta0 = cav.eta0(), xic = cav.xi_cutoff();
        auto cond = [&](int j, double k) {
            const double beta = parabolic_channel_beta(k, eta0, j);
            return parabolic_phase(k, beta, 1.0, xic) - 0.25 * std::numbers::pi;
        };
        double best = 0;
        int below = 0;
        for (int j = 0; j < 100000 && below < 2; ++j) {
            mode probe;
            probe.k = k_mid;
            probe.channel = j;
            probe.separation = parabolic_channel_beta(k_mid, eta0, j);
            const double w = coupling(probe);
            best = std::max(best, w);
            if (w < opt.channel_cutoff * best) {
                ++below;
                continue;
            }
            below = 0;
            ++basis.channels;
            for (const auto& [mi, k] : detail::roots([&](double k) { return cond(j, k); }, k_lo, k_hi)) {
                mode m;
                m.k = k;
                m.channel = j;
                m.longitudinal = mi;
                m.separation = parabolic_channel_beta(k, eta0, j);
                finish(m);
            }
        }
    }
    cavityqed::detail::sort_modes(basis.modes);
    return basis;
}

/// Pairs each WKB mode with the exact mode of the same quantum numbers.
struct mode_match {
    const mode* wkb{nullptr};
    const mode* exact{nullptr};
    [[nodiscard]] double relative_frequency_error() const { return std::abs(wkb->omega - exact->omega) / exact->omega; }
};

[[nodiscard]] inline std::vector<mode_match> match(const mode_basis& wkb, const mode_basis& exact) {
    std::vector<mode_match> out;
    for (const auto& w : wkb.modes) {
        for (const auto& e : exact.modes) {
            if (e.channel == w.channel && e.longitudinal == w.longitudinal) {
                out.push_back({&w, &e});
                break;
            }
        }
    }
    return out;
}

} // namespace wkb

/// Semiclassical mode basis.
[[nodiscard]] inline mode_basis quantize_wkb(const cavity_spec& cav, const physical_constants& pc, double omega_min,
                                             double omega_max, const quantize_options& opt = {}) {
    return wkb::quantize(cav, pc, omega_min, omega_max, opt);
}

} // namespace cavityqed
