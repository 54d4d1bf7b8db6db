#pragma once

// One-excitation dynamics. Amplitudes are reported in the frame rotating at
// omega_eg: c_a = b_a e^{i omega_eg t}, phi_j = f_j e^{i omega_eg t}, so
//
//   dc_a/dt   = -i sum_j kappa_aj phi_j,
//   dphi_j/dt = -i Delta_j phi_j - i sum_a kappa_aj c_a,   Delta_j = omega_j - omega_eg.
//
// Eliminating phi_j in the Laplace domain gives [(s + i omega_eg) + A(s)] b = b(0).

#include "cavityqed/errors.hpp"
#include "cavityqed/kernel.hpp"
#include "cavityqed/laplace.hpp"

#include <boost/numeric/odeint/stepper/runge_kutta4.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

namespace cavityqed {

using amp2 = std::array<cplx, 2>;

struct trajectory {
    std::size_t atoms{1};
    double dt{0};
    std::vector<double> t;
    std::vector<cplx> b1, b2;
    std::vector<double> P1, P2, norm;
    double tau{0};
    double gamma_free{0};
    /// Photon amplitudes phi_j at the listed sample indices.
    std::vector<std::size_t> photon_samples;
    std::vector<std::vector<cplx>> photons;

    [[nodiscard]] std::size_t size() const { return t.size(); }
};

/// Focus to focus travel time via the wall (ellipsoid) or focus-vertex-focus (parabola).
[[nodiscard]] inline double travel_time(const cavity_spec& cav, const physical_constants& pc) {
    return cav.shortest_return_path() / pc.c;
}

[[nodiscard]] inline amp2 initial_amplitudes(const kernel_matrix& km, std::size_t excited) {
    if (excited >= km.atoms()) throw config_error("initial atom index out of range");
    amp2 b0{};
    b0[excited] = 1.0;
    return b0;
}

/// Time beyond which discreteness of the truncated spectrum is resolved:
/// 2 pi over the mean spacing of the modes that couple to the atoms
/// (coupling above 1e-6 of the strongest) in the basis window.
[[nodiscard]] inline double validated_horizon(const kernel_matrix& km) {
    if (!(km.omega_eg() > km.window_low() && km.omega_eg() < km.window_high()))
        throw config_error("the basis window must contain omega_eg");
    const auto w = km.omega();
    double peak = 0;
    for (std::size_t a = 0; a < km.atoms(); ++a)
        for (double k : km.kappa(a)) peak = std::max(peak, k * k);
    std::size_t coupled = 0;
    for (std::size_t j = 0; j < w.size(); ++j) {
        double q = 0;
        for (std::size_t a = 0; a < km.atoms(); ++a) q = std::max(q, km.kappa(a)[j] * km.kappa(a)[j]);
        if (q > 1e-6 * peak) ++coupled;
    }
    if (coupled < 2) throw convergence_error("validated_horizon: fewer than two coupled modes");
    return 2.0 * std::numbers::pi * static_cast<double>(coupled) / (km.window_high() - km.window_low());
}

// ---------------------------------------------------------------------------
// Laplace domain.

namespace detail {

/// Products kappa_a kappa_b of the atoms, entries (11, 12, 22).
struct coupling_products {
    std::vector<double> delta;
    std::array<std::vector<double>, 3> k;

    explicit coupling_products(const kernel_matrix& km) {
        const auto w = km.omega();
        const auto k1 = km.kappa(0);
        delta.resize(w.size());
        for (auto& v : k) v.assign(w.size(), 0.0);
        for (std::size_t j = 0; j < w.size(); ++j) {
            delta[j] = w[j] - km.omega_eg();
            k[0][j] = k1[j] * k1[j];
            if (km.atoms() == 2) {
                const double k2 = km.kappa(1)[j];
                k[1][j] = k1[j] * k2;
                k[2][j] = k2 * k2;
            }
        }
    }

    /// A(p - i omega_eg) for p in the rotating frame.
    [[nodiscard]] std::array<cplx, 3> kernel(cplx p) const {
        const double g = p.real(), w = p.imag();
        double r0 = 0, i0 = 0, r1 = 0, i1 = 0, r2 = 0, i2 = 0;
        for (std::size_t j = 0; j < delta.size(); ++j) {
            const double y = w + delta[j];
            const double inv = 1.0 / (g * g + y * y);
            const double re = g * inv, im = -y * inv;
            r0 += k[0][j] * re;
            i0 += k[0][j] * im;
            r1 += k[1][j] * re;
            i1 += k[1][j] * im;
            r2 += k[2][j] * re;
            i2 += k[2][j] * im;
        }
        return {cplx(r0, i0), cplx(r1, i1), cplx(r2, i2)};
    }
};

inline amp2 apply(const std::array<cplx, 3>& m, const amp2& v) {
    return {m[0] * v[0] + m[1] * v[1], m[1] * v[0] + m[2] * v[1]};
}

inline amp2 solve_2x2(cplx d, const std::array<cplx, 3>& A, const amp2& b0, bool two) {
    if (!two) {
        const cplx m = d + A[0];
        if (m == 0.0) throw invariant_error("laplace_solve: singular system");
        return {b0[0] / m, 0.0};
    }
    const cplx m11 = d + A[0], m22 = d + A[2], m12 = A[1];
    const cplx det = m11 * m22 - m12 * m12;
    const double scale = std::max({std::abs(m11 * m22), std::abs(m12 * m12), 1e-300});
    if (std::abs(det) < 1e-14 * scale) throw invariant_error("laplace_solve: singular system");
    return {(m22 * b0[0] - m12 * b0[1]) / det, (m11 * b0[1] - m12 * b0[0]) / det};
}

} // namespace detail

/// Solves [(s + i omega_eg) I + A(s)] b = b(0) at a lab-frame Laplace variable s.
[[nodiscard]] inline amp2 laplace_solve(const kernel_matrix& km, const amp2& b0, cplx s) {
    if (!(s.real() > 0)) throw domain_error("laplace_solve: Re(s) must be positive");
    std::array<cplx, 3> A{km.A(0, 0, s).value, 0.0, 0.0};
    if (km.atoms() == 2) {
        A[1] = km.A(0, 1, s).value;
        A[2] = km.A(1, 1, s).value;
    }
    return detail::solve_2x2(s + cplx(0.0, km.omega_eg()), A, b0, km.atoms() == 2);
}

[[nodiscard]] inline std::vector<amp2> laplace_solve(const kernel_matrix& km, const amp2& b0,
                                                     std::span<const cplx> s_samples) {
    std::vector<amp2> out;
    out.reserve(s_samples.size());
    for (cplx s : s_samples) out.push_back(laplace_solve(km, b0, s));
    return out;
}

struct photon_path_term {
    int order{0};
    std::vector<amp2> laplace_value;
    std::vector<amp2> time_contribution;
};

struct neumann_expansion {
    std::vector<photon_path_term> terms;
    /// Sample indices at which term norms grew for three consecutive orders.
    std::vector<std::size_t> diverging;
};

/// Terms [-T1(s)]^n b(0) / (s + Gamma/2 + i omega_eg)^{n+1}, n = 0..n_max.
[[nodiscard]] inline neumann_expansion neumann_expand(const kernel_matrix& km, const amp2& b0,
                                                      std::span<const cplx> s_samples, int n_max) {
    if (n_max < 0) throw domain_error("neumann_expand: n_max must be non-negative");
    neumann_expansion out;
    out.terms.resize(static_cast<std::size_t>(n_max) + 1);
    for (int n = 0; n <= n_max; ++n) {
        out.terms[n].order = n;
        out.terms[n].laplace_value.resize(s_samples.size());
    }
    const double g = 0.5 * km.gamma_free();
    for (std::size_t i = 0; i < s_samples.size(); ++i) {
        const cplx s = s_samples[i];
        std::array<cplx, 3> T{km.T1(0, 0, s).value, 0.0, 0.0};
        if (km.atoms() == 2) {
            T[1] = km.T1(0, 1, s).value;
            T[2] = km.T1(1, 1, s).value;
        }
        const cplx r = 1.0 / (s + g + cplx(0.0, km.omega_eg()));
        amp2 y{b0[0] * r, b0[1] * r};
        double prev = std::hypot(std::abs(y[0]), std::abs(y[1]));
        int growth = 0;
        bool flagged = false;
        out.terms[0].laplace_value[i] = y;
        for (int n = 1; n <= n_max; ++n) {
            const auto ty = detail::apply(T, y);
            y = {-ty[0] * r, -ty[1] * r};
            out.terms[n].laplace_value[i] = y;
            const double cur = std::hypot(std::abs(y[0]), std::abs(y[1]));
            growth = cur > prev ? growth + 1 : 0;
            prev = cur;
            if (growth >= 3 && !flagged) {
                out.diverging.push_back(i);
                flagged = true;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Large-|p| expansion used as the analytic part of the Bromwich inversion.
// With q = p + beta, A = sum_m D_m / q^m, D_m = sum_j kappa kappa (beta - i Delta_j)^{m-1}.
// beta is a damped real shift so that t^n e^{-beta t} / n! stays bounded.

namespace detail {

struct expansion {
    double beta{0};
    std::vector<std::array<cplx, 3>> D; ///< D[m - 1]

    expansion(const coupling_products& cp, double beta_, int order) : beta(beta_), D(order) {
        for (std::size_t j = 0; j < cp.delta.size(); ++j) {
            const cplx z(beta, -cp.delta[j]);
            cplx zm = 1.0;
            for (int m = 0; m < order; ++m) {
                for (int e = 0; e < 3; ++e) D[m][e] += cp.k[e][j] * zm;
                zm *= z;
            }
        }
    }

    /// sum_m D_m y_{k-m}: coefficient of q^{-k} in A Y, for Y = sum_k y_k q^{-k}.
    [[nodiscard]] amp2 kernel_times(const std::vector<amp2>& y, std::size_t k) const {
        amp2 z{};
        for (std::size_t m = 1; m < k && m <= D.size(); ++m) {
            if (k - m < 1 || k - m > y.size()) continue;
            const auto t = apply(D[m - 1], y[k - m - 1]);
            z[0] += t[0];
            z[1] += t[1];
        }
        return z;
    }

    /// Coefficients of (q - beta + A)^{-1} b0.
    [[nodiscard]] std::vector<amp2> solution(const amp2& b0) const {
        std::vector<amp2> x{b0};
        for (std::size_t k = 1; k < D.size(); ++k) {
            const auto ax = kernel_times(x, k);
            x.push_back({beta * x[k - 1][0] - ax[0], beta * x[k - 1][1] - ax[1]});
        }
        return x;
    }

    /// Coefficients of the Neumann terms (-T1)^n R^{n+1} b0, R = 1/(p + g) = sum_j (beta - g)^j q^{-j-1}.
    [[nodiscard]] std::vector<std::vector<amp2>> neumann(const amp2& b0, double g, int n_max) const {
        const std::size_t K = D.size();
        auto times_R = [&](const std::vector<amp2>& z) {
            std::vector<amp2> out(K);
            for (std::size_t k = 2; k <= K; ++k) {
                cplx w = 1.0;
                for (std::size_t j = 0; j + 1 < k; ++j) {
                    const std::size_t src = k - 1 - j;
                    if (src <= z.size()) {
                        out[k - 1][0] += w * z[src - 1][0];
                        out[k - 1][1] += w * z[src - 1][1];
                    }
                    w *= beta - g;
                }
            }
            return out;
        };
        std::vector<std::vector<amp2>> terms;
        std::vector<amp2> y(K);
        cplx w = 1.0;
        for (std::size_t k = 1; k <= K; ++k) {
            y[k - 1] = {w * b0[0], w * b0[1]};
            w *= beta - g;
        }
        terms.push_back(y);
        for (int n = 1; n <= n_max; ++n) {
            std::vector<amp2> z(K);
            for (std::size_t k = 1; k <= K; ++k) {
                const auto a = kernel_times(y, k);
                z[k - 1] = {-(a[0] - g * y[k - 1][0]), -(a[1] - g * y[k - 1][1])};
            }
            y = times_R(z);
            terms.push_back(y);
        }
        return terms;
    }
};

inline pole_series<2> as_series(double beta, std::vector<amp2> c) { return {cplx(beta), std::move(c)}; }

inline void fill_populations(trajectory& tr) {
    const std::size_t n = tr.t.size();
    tr.P1.resize(n);
    tr.P2.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        tr.P1[i] = std::norm(tr.b1[i]);
        if (tr.atoms == 2) tr.P2[i] = std::norm(tr.b2[i]);
    }
}

} // namespace detail

struct laplace_options {
    int series_order{10};
    /// Shift of the expansion point in units of the largest detuning.
    double beta_factor{2.0};
    bromwich_options bromwich{};
};

/// Contour abscissa and window width for a run up to t_max.
[[nodiscard]] inline double max_detuning(const kernel_matrix& km) {
    double d = 0;
    for (double w : km.omega()) d = std::max(d, std::abs(w - km.omega_eg()));
    return d;
}

/// Amplitudes from the inverse transform of laplace_solve on t_n = n dt.
[[nodiscard]] inline trajectory evolve_laplace(const kernel_matrix& km, std::size_t excited, double dt, std::size_t nt,
                                               const laplace_options& opt = {},
                                               bromwich_result<2>* diagnostics = nullptr) {
    const auto b0 = initial_amplitudes(km, excited);
    const detail::coupling_products cp(km);
    const bool two = km.atoms() == 2;
    const double beta = opt.beta_factor * std::max(max_detuning(km), km.gamma_free());
    const detail::expansion ex(cp, beta, opt.series_order);
    auto F = [&](cplx p) { return detail::solve_2x2(p, cp.kernel(p), b0, two); };
    auto bopt = opt.bromwich;
    bopt.omega_half_width = std::max(bopt.omega_half_width, 4.0 * beta);
    auto res = inverse_laplace<2>(F, detail::as_series(beta, ex.solution(b0)), dt, nt, bopt);

    trajectory tr;
    tr.atoms = km.atoms();
    tr.dt = dt;
    tr.gamma_free = km.gamma_free();
    for (std::size_t n = 0; n < nt; ++n) {
        tr.t.push_back(static_cast<double>(n) * dt);
        tr.b1.push_back(res.values[n][0]);
        tr.b2.push_back(two ? res.values[n][1] : 0.0);
    }
    detail::fill_populations(tr);
    if (diagnostics) {
        res.values.clear();
        *diagnostics = std::move(res);
    }
    return tr;
}

/// Time-domain contributions of the Neumann orders 0..n_max on t_n = n dt.
[[nodiscard]] inline std::vector<std::vector<amp2>> photon_path_times(const kernel_matrix& km, std::size_t excited,
                                                                      double dt, std::size_t nt, int n_max,
                                                                      const laplace_options& opt = {}) {
    const auto b0 = initial_amplitudes(km, excited);
    const detail::coupling_products cp(km);
    const double g = 0.5 * km.gamma_free();
    const double beta = opt.beta_factor * std::max(max_detuning(km), km.gamma_free());
    const detail::expansion ex(cp, beta, opt.series_order + 2 * n_max);
    const auto series = ex.neumann(b0, g, n_max);
    auto bopt = opt.bromwich;
    bopt.omega_half_width = std::max(bopt.omega_half_width, 4.0 * beta);
    std::vector<std::vector<amp2>> out;
    for (int n = 0; n <= n_max; ++n) {
        auto F = [&](cplx p) {
            const auto A = cp.kernel(p);
            const std::array<cplx, 3> T{A[0] - g, A[1], A[2] - g};
            const cplx r = 1.0 / (p + g);
            amp2 y{b0[0] * r, b0[1] * r};
            for (int i = 0; i < n; ++i) {
                const auto ty = detail::apply(T, y);
                y = {-ty[0] * r, -ty[1] * r};
            }
            return y;
        };
        out.push_back(inverse_laplace<2>(F, detail::as_series(beta, series[n]), dt, nt, bopt).values);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Time domain.

struct exact_options {
    /// Fixed step h <= step_factor / Omega, Omega the largest rotating-frame frequency.
    double step_factor{0.01};
    double norm_tol{1e-5};
    std::vector<std::size_t> photon_samples;
};

/// Largest frequency of the rotating-frame generator: detuning plus collective coupling.
[[nodiscard]] inline double generator_bound(const kernel_matrix& km) {
    double s = 0;
    for (std::size_t a = 0; a < km.atoms(); ++a)
        for (double k : km.kappa(a)) s += k * k;
    return max_detuning(km) + std::sqrt(s);
}

/// Runge-Kutta integration of the truncated-basis equations.
[[nodiscard]] inline trajectory evolve_exact(const kernel_matrix& km, std::size_t excited, double dt, std::size_t nt,
                                             const exact_options& opt = {}) {
    if (!(dt > 0) || nt < 1) throw domain_error("evolve_exact: need dt > 0 and at least one sample");
    const auto b0 = initial_amplitudes(km, excited);
    const std::size_t M = km.modes(), A = km.atoms();
    const auto k1 = km.kappa(0);
    const auto k2 = A == 2 ? km.kappa(1) : k1;
    std::vector<double> delta(M);
    for (std::size_t j = 0; j < M; ++j) delta[j] = km.omega()[j] - km.omega_eg();

    using state = std::vector<cplx>;
    const cplx I(0.0, 1.0);
    auto rhs = [&](const state& x, state& dx, double) {
        const cplx c1 = x[0], c2 = x[1];
        cplx s1 = 0, s2 = 0;
        for (std::size_t j = 0; j < M; ++j) {
            const cplx phi = x[2 + j];
            s1 += k1[j] * phi;
            if (A == 2) s2 += k2[j] * phi;
            const cplx drive = A == 2 ? k1[j] * c1 + k2[j] * c2 : k1[j] * c1;
            dx[2 + j] = -I * (delta[j] * phi + drive);
        }
        dx[0] = -I * s1;
        dx[1] = A == 2 ? -I * s2 : cplx(0.0);
    };

    const double omega = generator_bound(km);
    const auto sub = static_cast<std::size_t>(std::ceil(dt * omega / opt.step_factor));
    const double h = dt / static_cast<double>(std::max<std::size_t>(sub, 1));
    boost::numeric::odeint::runge_kutta4<state> stepper;

    state x(2 + M, 0.0);
    x[0] = b0[0];
    x[1] = b0[1];
    trajectory tr;
    tr.atoms = A;
    tr.dt = dt;
    tr.gamma_free = km.gamma_free();
    tr.photon_samples = opt.photon_samples;
    tr.photons.resize(opt.photon_samples.size());
    double t = 0;
    for (std::size_t n = 0; n < nt; ++n) {
        if (n > 0)
            for (std::size_t i = 0; i < sub; ++i) {
                stepper.do_step(rhs, x, t, h);
                t += h;
            }
        t = static_cast<double>(n) * dt;
        double norm = std::norm(x[0]) + std::norm(x[1]);
        for (std::size_t j = 0; j < M; ++j) norm += std::norm(x[2 + j]);
        if (std::abs(norm - 1.0) > opt.norm_tol)
            throw convergence_error("evolve_exact: norm drift " + std::to_string(norm - 1.0) + " at t = " +
                                    std::to_string(t));
        tr.t.push_back(t);
        tr.b1.push_back(x[0]);
        tr.b2.push_back(A == 2 ? x[1] : 0.0);
        tr.norm.push_back(norm);
        for (std::size_t p = 0; p < opt.photon_samples.size(); ++p)
            if (opt.photon_samples[p] == n) tr.photons[p].assign(x.begin() + 2, x.end());
    }
    detail::fill_populations(tr);
    return tr;
}

namespace detail {

/// int_0^1 e^{z (1 - x)} x^k dx for k = 0..3.
inline std::array<cplx, 4> damped_moments(cplx z) {
    std::array<cplx, 4> nu{};
    if (std::abs(z) < 2.0) {
        // sum_m z^m k! / (m + k + 1)!
        for (int k = 0; k < 4; ++k) {
            cplx term = 1.0 / static_cast<double>(k + 1);
            cplx sum = term;
            for (int m = 1; m < 40; ++m) {
                term *= z / static_cast<double>(m + k + 1);
                sum += term;
            }
            nu[k] = sum;
        }
        return nu;
    }
    nu[0] = (std::exp(z) - 1.0) / z;
    for (int k = 1; k < 4; ++k) nu[k] = (static_cast<double>(k) * nu[k - 1] - 1.0) / z;
    return nu;
}

/// Monomial coefficients of the Lagrange basis on four integer nodes.
inline std::array<std::array<double, 4>, 4> lagrange_cubic(const std::array<int, 4>& x) {
    std::array<std::array<double, 4>, 4> c{};
    for (int i = 0; i < 4; ++i) {
        std::array<double, 4> p{1.0, 0.0, 0.0, 0.0};
        double den = 1.0;
        int deg = 0;
        for (int j = 0; j < 4; ++j) {
            if (j == i) continue;
            for (int d = deg + 1; d > 0; --d) p[d] = p[d - 1] - x[j] * p[d];
            p[0] *= -x[j];
            ++deg;
            den *= x[i] - x[j];
        }
        for (int d = 0; d < 4; ++d) c[i][d] = p[d] / den;
    }
    return c;
}

} // namespace detail

/// Photon amplitudes from the atomic trajectory by the formal solution
/// phi_j(t) = -i sum_a kappa_aj int_0^t e^{-i Delta_j (t - t')} c_a(t') dt',
/// with c interpolated by cubics through neighbouring samples and the
/// exponential integrated exactly. Returns phi at the listed sample indices;
/// fills tr.norm when `fill_norm`.
[[nodiscard]] inline std::vector<std::vector<cplx>> reconstruct_photons(const kernel_matrix& km, trajectory& tr,
                                                                        std::span<const std::size_t> samples,
                                                                        bool fill_norm = false) {
    const std::size_t M = km.modes(), nt = tr.size();
    if (nt < 4) throw domain_error("reconstruct_photons: need at least four samples");
    const double h = tr.dt;
    const cplx I(0.0, 1.0);
    // stencils relative to the left end of an interval: interior, first, last
    const std::array<std::array<int, 4>, 3> stencil{{{-1, 0, 1, 2}, {0, 1, 2, 3}, {-2, -1, 0, 1}}};
    std::array<std::array<std::array<double, 4>, 4>, 3> lag;
    for (int s = 0; s < 3; ++s) lag[s] = detail::lagrange_cubic(stencil[s]);
    std::vector<cplx> decay(M), phi(M, 0.0);
    std::vector<std::array<std::array<cplx, 4>, 3>> weight(M);
    for (std::size_t j = 0; j < M; ++j) {
        const cplx z = -I * (km.omega()[j] - km.omega_eg()) * h;
        const auto nu = detail::damped_moments(z);
        decay[j] = std::exp(z);
        for (int s = 0; s < 3; ++s)
            for (int i = 0; i < 4; ++i) {
                cplx w = 0;
                for (int d = 0; d < 4; ++d) w += lag[s][i][d] * nu[d];
                weight[j][s][i] = h * w;
            }
    }
    const auto k1 = km.kappa(0);
    const auto k2 = km.atoms() == 2 ? km.kappa(1) : k1;
    const bool two = km.atoms() == 2;
    std::vector<std::vector<cplx>> out(samples.size());
    if (fill_norm) tr.norm.assign(nt, 0.0);
    for (std::size_t n = 0; n < nt; ++n) {
        if (n > 0) {
            const std::size_t left = n - 1;
            const int s = left == 0 ? 1 : (left + 2 >= nt ? 2 : 0);
            std::array<cplx, 4> c1, c2;
            for (int i = 0; i < 4; ++i) {
                const auto idx = static_cast<std::size_t>(static_cast<long>(left) + stencil[s][i]);
                c1[i] = tr.b1[idx];
                c2[i] = two ? tr.b2[idx] : cplx(0.0);
            }
            for (std::size_t j = 0; j < M; ++j) {
                const auto& w = weight[j][s];
                const cplx i1 = w[0] * c1[0] + w[1] * c1[1] + w[2] * c1[2] + w[3] * c1[3];
                cplx drive = k1[j] * i1;
                if (two) drive += k2[j] * (w[0] * c2[0] + w[1] * c2[1] + w[2] * c2[2] + w[3] * c2[3]);
                phi[j] = decay[j] * phi[j] - I * drive;
            }
        }
        if (fill_norm) {
            double sum = tr.P1[n] + tr.P2[n];
            for (const auto& p : phi) sum += std::norm(p);
            tr.norm[n] = sum;
        }
        for (std::size_t p = 0; p < samples.size(); ++p)
            if (samples[p] == n) out[p] = phi;
    }
    return out;
}

} // namespace cavityqed
