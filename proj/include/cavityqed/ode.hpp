#pragma once

// Shooting machinery for the separated second-order ODEs
//
//     s(x) y'' + p(x) y' + q(x) y = 0,   x in [0, L]
//
// with quadratic s, linear p and quadratic q. When s(0) = 0 the origin is a
// regular singular point and the bounded solution is selected by
// y(0) = 1, y'(0) = -q(0)/p(0). The far end carries a boundary condition
// alpha y + beta y' = 0.
//
// Eigenvalues are located through the unwrapped Pruefer angle
// theta = atan2(y, scale * y'), which counts nodes and is monotone in the
// spectral parameter.

#include "cavityqed/errors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>

#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

namespace cavityqed {

struct separated_ode {
    // s(x) = s0 + s1 x + s2 x^2
    double s0{0}, s1{0}, s2{0};
    // p(x) = p0 + p1 x
    double p0{0}, p1{0};
    // q(x) = q0 + q1 x + q2 x^2
    double q0{0}, q1{0}, q2{0};
    double length{1};
    // initial data used when the origin is regular (s0 != 0)
    double y0{0}, dy0{1};
    // far boundary: bc_alpha y + bc_beta y' = 0
    double bc_alpha{1}, bc_beta{0};
    // scale applied to y' inside the Pruefer angle
    double phase_scale{1};

    [[nodiscard]] bool singular_origin() const { return s0 == 0.0; }
    [[nodiscard]] double s(double x) const { return s0 + x * (s1 + x * s2); }
    [[nodiscard]] double p(double x) const { return p0 + x * p1; }
    [[nodiscard]] double q(double x) const { return q0 + x * (q1 + x * q2); }

    [[nodiscard]] double second_derivative(double x, double y, double dy) const {
        if (singular_origin() && x == 0.0) return origin_second_derivative(y, dy);
        return -(p(x) * dy + q(x) * y) / s(x);
    }

    /// Bounded solution data at x = 0: (y, y', y'').
    [[nodiscard]] std::array<double, 3> origin_data() const {
        if (!singular_origin()) return {y0, dy0, second_derivative(0.0, y0, dy0)};
        const double y = 1.0;
        const double dy = -q0 * y / p0;
        return {y, dy, origin_second_derivative(y, dy)};
    }

    /// Angle of the far boundary condition, in [0, pi).
    [[nodiscard]] double boundary_angle() const {
        double a = std::atan2(bc_beta, -phase_scale * bc_alpha);
        if (a < 0) a += std::numbers::pi;
        if (a >= std::numbers::pi) a -= std::numbers::pi;
        return a;
    }

private:
    [[nodiscard]] double origin_second_derivative(double y, double dy) const {
        return -((p1 + q0) * dy + q1 * y) / (s1 + p0);
    }
};

struct shoot_options {
    double abs_tol{1e-11};
    double rel_tol{1e-11};
    /// Relative offset from a singular origin where integration starts.
    double origin_offset{1e-7};
    /// Threshold of |Q'| / Q^(3/2) beyond which the oscillatory tail is
    /// continued in phase-amplitude form; zero disables the continuation.
    double far_field_tol{1e-3};
};

/// Outcome of a single integration across [0, L].
template <std::size_t K>
struct shot {
    double y{0};
    double dy{0};
    double phase{0};      ///< unwrapped Pruefer angle at x = L
    double start_phase{0};
    int nodes{0};          ///< zeros of y in (0, L), endpoints excluded
    std::array<double, K> integrals{}; ///< integrals of weight_k(x) y(x)^2
    std::vector<double> sample_y, sample_dy;
};

namespace detail {

inline double wrap_to(double angle, double reference) {
    const double two_pi = 2.0 * std::numbers::pi;
    return angle + two_pi * std::round((reference - angle) / two_pi);
}

struct no_weights {
    std::array<double, 0> operator()(double) const { return {}; }
};

} // namespace detail

namespace detail {

// Equations with s = s1 x, p = p0 and linear q have the normal form
// u'' + Q u = 0, u = x^nu y, Q = alpha + gamma / x + delta / x^2.
struct normal_form {
    double alpha{0}, gamma{0}, delta{0}, nu{0};

    [[nodiscard]] double Q(double x) const { return alpha + (gamma + delta / x) / x; }
    [[nodiscard]] double dQ(double x) const { return -(gamma + 2.0 * delta / x) / (x * x); }
    [[nodiscard]] double d2Q(double x) const { return (2.0 * gamma + 6.0 * delta / x) / (x * x * x); }
};

inline bool has_normal_form(const separated_ode& o) {
    return o.s0 == 0.0 && o.s2 == 0.0 && o.p1 == 0.0 && o.q2 == 0.0 && o.s1 != 0.0;
}

inline normal_form make_normal_form(const separated_ode& o) {
    normal_form f;
    f.nu = o.p0 / (2.0 * o.s1);
    f.alpha = o.q1 / o.s1;
    f.gamma = o.q0 / o.s1;
    f.delta = f.nu * (1.0 - f.nu);
    return f;
}

// Start of the region where |Q'| / Q^(3/2) stays below `tol`; returns the
// interval length when no such region covers at least half of it.
inline double far_field_start(const separated_ode& o, double tol) {
    const double L = o.length;
    if (!has_normal_form(o)) return L;
    const auto f = make_normal_form(o);
    if (!(f.alpha > 0)) return L;
    double good = L;
    const double floor_x = 8.0 * std::numbers::pi / std::sqrt(f.alpha); // a few wavelengths
    for (double x = L; x > floor_x; x /= 1.125) {
        const double q = f.Q(x);
        if (!(q > 0) || std::abs(f.dQ(x)) > tol * q * std::sqrt(q)) break;
        good = x;
    }
    return good <= 0.5 * L ? good : L;
}

// Non-oscillating solution of Milne's equation w'' + Q w = w^-3 to second order.
inline std::array<double, 2> milne_start(const normal_form& f, double x) {
    auto a_of = [&](double t) {
        const double q = f.Q(t), dq = f.dQ(t), d2q = f.d2Q(t);
        const double w0dd = 5.0 / 16.0 * std::pow(q, -2.25) * dq * dq - 0.25 * std::pow(q, -1.25) * d2q;
        return -w0dd / (4.0 * std::pow(q, 0.75));
    };
    const double q = f.Q(x);
    const double w0 = std::pow(q, -0.25);
    const double dw0 = -0.25 * std::pow(q, -1.25) * f.dQ(x);
    const double h = 1e-4 * x;
    const double a = a_of(x);
    const double da = (a_of(x + h) - a_of(x - h)) / (2.0 * h);
    return {w0 * (1.0 + a), dw0 * (1.0 + a) + w0 * da};
}

} // namespace detail

/// Integrates the bounded solution across the interval.
///
/// `weights(x)` returns K functions whose integrals against y^2 are
/// accumulated. `samples` (ascending) requests y, y' at extra abscissae.
///
/// Where the equation has a normal form u'' + Q u = 0 with slowly varying Q,
/// the tail is continued through u = A w sin(Phi), Phi' = w^-2, with the
/// non-oscillating Milne amplitude w to second order; the neglected terms are
/// of fourth order in |Q'| / Q^(3/2). Integrals of y^2 there are the smooth
/// mean plus the asymptotic end-point terms of the oscillating part.
template <std::size_t K = 0, class Weights = detail::no_weights>
[[nodiscard]] shot<K> integrate(const separated_ode& ode, Weights weights = {},
                                std::span<const double> samples = {}, const shoot_options& opt = {}) {
    namespace odeint = boost::numeric::odeint;
    using state = std::array<double, 2 + K>;

    const double L = ode.length;
    const double x_end = opt.far_field_tol > 0 ? detail::far_field_start(ode, opt.far_field_tol) : L;
    const auto origin = ode.origin_data();
    double x0 = 0.0;
    state st{};
    st[0] = origin[0];
    st[1] = origin[1];
    if (ode.singular_origin()) {
        x0 = opt.origin_offset * L;
        st[0] = origin[0] + x0 * (origin[1] + 0.5 * x0 * origin[2]);
        st[1] = origin[1] + x0 * origin[2];
    }
    if constexpr (K > 0) {
        // trapezoid over [0, x0]
        const auto w0 = weights(0.0);
        const auto w1 = weights(x0);
        for (std::size_t k = 0; k < K; ++k)
            st[2 + k] = 0.5 * x0 * (w0[k] * origin[0] * origin[0] + w1[k] * st[0] * st[0]);
    }

    auto rhs = [&](const state& s, state& ds, double x) {
        ds[0] = s[1];
        ds[1] = ode.second_derivative(x, s[0], s[1]);
        if constexpr (K > 0) {
            const auto w = weights(x);
            for (std::size_t k = 0; k < K; ++k) ds[2 + k] = w[k] * s[0] * s[0];
        }
    };

    shot<K> out;
    out.sample_y.reserve(samples.size());
    out.sample_dy.reserve(samples.size());
    const double sc = ode.phase_scale;
    out.start_phase = std::atan2(origin[0], sc * origin[1]);
    double phase = std::atan2(st[0], sc * st[1]);
    phase = detail::wrap_to(phase, out.start_phase);
    std::size_t next_sample = 0;

    // samples that fall before the integration start
    while (next_sample < samples.size() && samples[next_sample] <= x0) {
        const double x = samples[next_sample++];
        out.sample_y.push_back(origin[0] + x * (origin[1] + 0.5 * x * origin[2]));
        out.sample_dy.push_back(origin[1] + x * origin[2]);
    }

    auto stepper = odeint::make_dense_output(opt.abs_tol, opt.rel_tol, x_end / 16.0,
                                             odeint::runge_kutta_dopri5<state>());
    stepper.initialize(st, x0, std::min(1e-3 * x_end, std::max(x0, 1e-12 * x_end)));
    state tmp;
    while (stepper.current_time() < x_end) {
        const auto [t0, t1] = stepper.do_step(rhs);
        const double t_stop = std::min(t1, x_end);
        // Sub-sample so that the angle moves by at most pi/2 between records.
        int parts = 1;
        {
            stepper.calc_state(t_stop, tmp);
            const double a = detail::wrap_to(std::atan2(tmp[0], sc * tmp[1]), phase);
            parts = std::max(1, static_cast<int>(std::ceil(std::abs(a - phase) / (0.5 * std::numbers::pi))));
        }
        for (int i = 1; i <= parts; ++i) {
            stepper.calc_state(t0 + (t_stop - t0) * i / parts, tmp);
            phase = detail::wrap_to(std::atan2(tmp[0], sc * tmp[1]), phase);
        }
        while (next_sample < samples.size() && samples[next_sample] <= t_stop) {
            stepper.calc_state(samples[next_sample++], tmp);
            out.sample_y.push_back(tmp[0]);
            out.sample_dy.push_back(tmp[1]);
        }
    }
    stepper.calc_state(x_end, tmp);
    out.y = tmp[0];
    out.dy = tmp[1];
    out.phase = detail::wrap_to(std::atan2(tmp[0], sc * tmp[1]), phase);
    if constexpr (K > 0)
        for (std::size_t k = 0; k < K; ++k) out.integrals[k] = tmp[2 + k];

    if (x_end < L) {
        const auto nf = detail::make_normal_form(ode);
        const double xm = x_end;
        const double um = std::pow(xm, nf.nu) * out.y;
        const double dum = std::pow(xm, nf.nu) * (out.dy + nf.nu * out.y / xm);
        const auto [wm, dwm] = detail::milne_start(nf, xm);
        const double a_sin = um / wm, a_cos = wm * dum - dwm * um;
        const double amp = std::hypot(a_sin, a_cos);
        const double phi_m = detail::wrap_to(std::atan2(a_sin, a_cos), out.phase);

        auto g_of = [&](double x) {
            std::array<double, K> g{};
            if constexpr (K > 0) {
                const auto w = weights(x);
                const double scale = std::pow(x, -2.0 * nf.nu);
                for (std::size_t k = 0; k < K; ++k) g[k] = w[k] * scale;
            }
            return g;
        };
        using gk = boost::math::quadrature::gauss_kronrod<double, 31>;
        auto phase_gain = [&](double from, double to) {
            auto rate = [&](double x) {
                const double w = detail::milne_start(nf, x)[0];
                return 1.0 / (w * w);
            };
            return gk::integrate(rate, from, to, 20, 1e-14);
        };
        // end-point terms of int g w^2 cos(2 Phi) dx = int h cos(2 Phi) dPhi, h = g w^4
        auto boundary = [&](double x, double ph) {
            std::array<double, K> out_b{};
            if constexpr (K > 0) {
                const auto [w, dw] = detail::milne_start(nf, x);
                const double d2w = -nf.Q(x) * w + 1.0 / (w * w * w);
                const double hstep = 1e-3 * x;
                const auto gm = g_of(x - hstep), g0 = g_of(x), gp = g_of(x + hstep);
                const double s2 = std::sin(2.0 * ph), c2 = std::cos(2.0 * ph);
                for (std::size_t k = 0; k < K; ++k) {
                    const double g = g0[k];
                    const double dg = (gp[k] - gm[k]) / (2.0 * hstep);
                    const double d2g = (gp[k] - 2.0 * g + gm[k]) / (hstep * hstep);
                    const double w2 = w * w, w3 = w2 * w, w4 = w2 * w2;
                    const double h = g * w4;
                    const double dh = dg * w4 + 4.0 * g * w3 * dw;
                    const double d2h = d2g * w4 + 8.0 * dg * w3 * dw + 4.0 * g * (3.0 * w2 * dw * dw + w3 * d2w);
                    const double h_phi = w2 * dh;
                    const double h_phiphi = w2 * (2.0 * w * dw * dh + w2 * d2h);
                    out_b[k] = 0.5 * h * s2 + 0.25 * h_phi * c2 - 0.125 * h_phiphi * s2;
                }
            }
            return out_b;
        };
        auto to_y = [&](double x, double ph) {
            const auto [w, dw] = detail::milne_start(nf, x);
            const double sn = std::sin(ph), cs = std::cos(ph);
            const double u = amp * w * sn;
            const double du = amp * (dw * sn + cs / w);
            const double xn = std::pow(x, -nf.nu);
            return std::array<double, 2>{u * xn, xn * (du - nf.nu * u / x)};
        };

        double x_prev = xm, phi = phi_m;
        while (next_sample < samples.size() && samples[next_sample] <= L) {
            const double x = samples[next_sample++];
            phi += phase_gain(x_prev, x);
            x_prev = x;
            const auto yy = to_y(x, phi);
            out.sample_y.push_back(yy[0]);
            out.sample_dy.push_back(yy[1]);
        }
        phi += phase_gain(x_prev, L);
        const auto yy = to_y(L, phi);
        out.y = yy[0];
        out.dy = yy[1];
        out.phase = detail::wrap_to(std::atan2(out.y, sc * out.dy), phi);
        if constexpr (K > 0) {
            const auto b_start = boundary(xm, phi_m);
            const auto b_end = boundary(L, phi);
            for (std::size_t k = 0; k < K; ++k) {
                auto smooth = [&](double x) {
                    const double w = detail::milne_start(nf, x)[0];
                    return g_of(x)[k] * w * w;
                };
                const double mean = gk::integrate(smooth, xm, L, 20, 1e-14);
                out.integrals[k] += amp * amp * 0.5 * (mean - (b_end[k] - b_start[k]));
            }
        }
    }

    // y vanishes where the angle crosses a multiple of pi; zeros within
    // a small angular margin of either end belong to the endpoints.
    {
        constexpr double margin = 1e-6;
        const double pi = std::numbers::pi;
        const double lo = out.start_phase + margin, hi = out.phase - margin;
        out.nodes = hi > lo ? std::max(0, static_cast<int>(std::floor(hi / pi) - std::ceil(lo / pi)) + 1) : 0;
    }
    while (next_sample < samples.size()) {
        // beyond L: clamp to the endpoint value
        ++next_sample;
        out.sample_y.push_back(out.y);
        out.sample_dy.push_back(out.dy);
    }
    return out;
}

/// Signed distance of the end phase from the j-th admissible boundary angle.
[[nodiscard]] inline double phase_mismatch(const separated_ode& ode, int j, double end_phase) {
    return end_phase - (ode.boundary_angle() + j * std::numbers::pi);
}

/// Index j such that the end phase lies in [bc + j pi, bc + (j+1) pi).
[[nodiscard]] inline int phase_index(const separated_ode& ode, double end_phase) {
    return static_cast<int>(std::floor((end_phase - ode.boundary_angle()) / std::numbers::pi));
}

struct eigen_result {
    double parameter{0};
    double mismatch{0};
    int iterations{0};
};

/// Finds the parameter in [lo, hi] at which the end phase of `family(param)`
/// reaches bc + j pi. Requires a sign change of the mismatch over the bracket.
template <class Family>
[[nodiscard]] eigen_result shoot_eigen(Family&& family, int j, double lo, double hi,
                                       double mismatch_tol = 1e-10, const shoot_options& opt = {}) {
    auto mismatch = [&](double param) {
        const separated_ode ode = family(param);
        return phase_mismatch(ode, j, integrate(ode, detail::no_weights{}, {}, opt).phase);
    };
    double flo = mismatch(lo);
    double fhi = mismatch(hi);
    if (flo == 0.0) return {lo, 0.0, 0};
    if (fhi == 0.0) return {hi, 0.0, 0};
    if ((flo > 0) == (fhi > 0)) throw convergence_error("shoot_eigen: no root in bracket");
    std::uintmax_t max_iter = 200;
    int evaluations = 2;
    auto counted = [&](double param) {
        ++evaluations;
        return mismatch(param);
    };
    auto tol = [&](double a, double b) { return std::abs(b - a) <= 4e-16 * std::max(std::abs(a), std::abs(b)); };
    auto [a, b] = boost::math::tools::toms748_solve(counted, lo, hi, flo, fhi, tol, max_iter);
    const double fa = mismatch(a);
    const double fb = mismatch(b);
    eigen_result r = std::abs(fa) <= std::abs(fb) ? eigen_result{a, fa, evaluations} : eigen_result{b, fb, evaluations};
    if (std::abs(r.mismatch) > mismatch_tol)
        throw convergence_error("shoot_eigen: mismatch above tolerance after refinement");
    return r;
}

} // namespace cavityqed
