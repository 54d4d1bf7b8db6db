#pragma once

// Cavity modes coupling to z-oriented dipoles at the foci.
//
// Every such mode is g = curl(e_phi psi) with psi = N F(xi) G(eta). Writing
// rho psi = rho^2 Fr where Fr is regular on the axis gives
//
//     E_z   = 2 Fr + rho dFr/drho,   E_rho = -rho dFr/dz,
//     h_phi = k rho Fr               (magnetic profile curl(g) / k),
//
// so g_z at a focus is 2 Fr(focus). The regular factors are
//
//   ellipsoid: Fr = N P(xi) Q(eta) / c0 with psi = N sqrt(xi^2-1) P sqrt(1-eta^2) Q,
//   parabola:  Fr = N U(xi) V(eta)      with psi = N sqrt(xi) U sqrt(eta) V.
//
// P, Q, U, V solve the separated equations built by separated_odes() and are
// normalized to 1 at the focus. The conducting wall requires the normal
// derivative of rho psi to vanish.

#include "cavityqed/errors.hpp"
#include "cavityqed/geometry.hpp"
#include "cavityqed/ode.hpp"
#include "cavityqed/prolate_angular.hpp"

#include <boost/math/special_functions/chebyshev.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

namespace cavityqed {

enum class provenance { exact, wkb };

inline const char* to_string(provenance p) { return p == provenance::exact ? "exact" : "wkb"; }

struct mode {
    double omega{0};
    double k{0};                ///< omega / c
    int channel{0};             ///< transverse index (eta nodes, or prolate channel n >= 1)
    int longitudinal{0};        ///< nodes of the xi factor
    double separation{0};       ///< lambda (ellipsoid) or beta (parabola)
    double normalization{0};    ///< N
    double norm_integral{0};    ///< int |g|^2 dV of the unnormalized mode (N = 1)
    std::array<double, 2> gz_focus{0.0, 0.0};

    [[nodiscard]] int parity() const { return prolate::parity_of_channel(std::max(channel, 1)); }
};

struct mode_basis {
    cavity_spec cavity;
    physical_constants constants;
    std::vector<mode> modes;
    double omega_min{0};
    double omega_max{0};
    provenance origin{provenance::exact};
    int channels{0};
};

struct quantize_options {
    /// Channels whose estimated focal coupling falls below this fraction of
    /// the strongest channel are dropped.
    double channel_cutoff{1e-6};
    std::size_t max_modes{400000};
    double mismatch_tol{1e-8};
    shoot_options shooting{1e-10, 1e-10, 1e-7};
};

// ---------------------------------------------------------------------------
// Separated equations.

/// Pair of separated equations at wavenumber k. `first` is the xi factor,
/// `second` the eta factor. For the ellipsoid the eta equation is posed on
/// the half interval x = 1 - eta in [0, 1] with the parity condition at
/// eta = 0.
struct separated_pair {
    separated_ode first;
    separated_ode second;
};

namespace detail {

inline separated_ode prolate_radial_ode(const cavity_spec& cav, double k, double lambda) {
    const double c = k * cav.c0();
    const double xi0 = cav.xi0();
    separated_ode o;
    // x = xi - 1: x(2+x) P'' + 4(1+x) P' + (c^2 (1+x)^2 - lambda + 2) P = 0
    o.s1 = 2.0;
    o.s2 = 1.0;
    o.p0 = 4.0;
    o.p1 = 4.0;
    o.q0 = c * c - lambda + 2.0;
    o.q1 = 2.0 * c * c;
    o.q2 = c * c;
    o.length = xi0 - 1.0;
    // d/dxi[(xi^2 - 1) P] = 0
    o.bc_alpha = 2.0 * xi0;
    o.bc_beta = xi0 * xi0 - 1.0;
    o.phase_scale = 1.0 / std::max(c, 1.0);
    return o;
}

inline separated_ode prolate_angular_ode(double c, double lambda, int parity) {
    separated_ode o;
    // x = 1 - eta: x(2-x) Q'' + 4(1-x) Q' + (lambda - 2 - c^2 (1-x)^2) Q = 0
    o.s1 = 2.0;
    o.s2 = -1.0;
    o.p0 = 4.0;
    o.p1 = -4.0;
    o.q0 = lambda - 2.0 - c * c;
    o.q1 = 2.0 * c * c;
    o.q2 = -c * c;
    o.length = 1.0;
    if (parity == 0) {
        o.bc_alpha = 0.0;
        o.bc_beta = 1.0;
    } else {
        o.bc_alpha = 1.0;
        o.bc_beta = 0.0;
    }
    o.phase_scale = 1.0 / std::max(c, 1.0);
    return o;
}

// x U'' + 2 U' + (k^2 x / 4 + sign * beta) U = 0 on [0, wall], (x U)' = 0 at the wall.
inline separated_ode parabolic_ode(double k, double beta, double sign, double wall) {
    separated_ode o;
    o.s1 = 1.0;
    o.p0 = 2.0;
    o.q0 = sign * beta;
    o.q1 = 0.25 * k * k;
    o.length = wall;
    o.bc_alpha = 1.0;
    o.bc_beta = wall;
    o.phase_scale = 2.0 / k;
    return o;
}

} // namespace detail

[[nodiscard]] inline separated_pair separated_odes(const cavity_spec& cav, double k, double separation,
                                                   int parity = 0) {
    if (!(k > 0)) throw domain_error("separated_odes: wavenumber must be positive");
    if (cav.is_ellipsoid())
        return {detail::prolate_radial_ode(cav, k, separation),
                detail::prolate_angular_ode(k * cav.c0(), separation, parity)};
    if (cav.is_parabolic())
        return {detail::parabolic_ode(k, separation, +1.0, cav.xi_cutoff()),
                detail::parabolic_ode(k, separation, -1.0, cav.eta0())};
    throw domain_error("separated_odes: unsupported cavity");
}

/// Interior nodes expected for phase index j given the boundary angle.
[[nodiscard]] inline int expected_nodes(const separated_ode& ode, int j) {
    return ode.boundary_angle() > 0.0 ? j : j - 1;
}

// ---------------------------------------------------------------------------
// Normalization.

namespace detail {

struct prolate_radial_weights {
    std::array<double, 2> operator()(double x) const {
        const double w = x * (2.0 + x);
        return {w, (1.0 + x) * (1.0 + x) * w};
    }
};

struct prolate_angular_weights {
    std::array<double, 2> operator()(double x) const {
        const double w = x * (2.0 - x);
        return {w, (1.0 - x) * (1.0 - x) * w};
    }
};

struct parabolic_weights {
    std::array<double, 2> operator()(double x) const { return {x, x * x}; }
};

} // namespace detail

/// Separable integrals entering int psi^2 dV for focus-normalized factors.
struct norm_integrals {
    double first0{0}, first2{0};   // int w0 F^2, int w2 F^2
    double second0{0}, second2{0}; // same for G (full eta range)
};

/// int |g|^2 dV for N = 1, i.e. k^2 int psi^2 dV.
[[nodiscard]] inline double mode_norm_integral(const cavity_spec& cav, double k, const norm_integrals& I) {
    if (cav.is_ellipsoid()) {
        const double c0 = cav.c0();
        // dV = c0^3 (xi^2 - eta^2) dxi deta dphi
        return k * k * 2.0 * std::numbers::pi * c0 * c0 * c0 * (I.first2 * I.second0 - I.first0 * I.second2);
    }
    // dV = (xi + eta)/4 dxi deta dphi, first: (xi U^2, xi^2 U^2), second: (eta V^2, eta^2 V^2)
    return k * k * 0.5 * std::numbers::pi * (I.first2 * I.second0 + I.first0 * I.second2);
}

/// Fills normalization and focal couplings of `m` from its norm integrals.
inline void apply_normalization(mode& m, const cavity_spec& cav, const norm_integrals& I) {
    m.norm_integral = mode_norm_integral(cav, m.k, I);
    if (!(m.norm_integral > 0) || !std::isfinite(m.norm_integral))
        throw convergence_error("normalize_mode: norm integral is not positive");
    m.normalization = 1.0 / std::sqrt(m.norm_integral);
    if (cav.is_ellipsoid()) {
        const double gz = 2.0 * m.normalization / cav.c0();
        m.gz_focus = {gz, m.parity() == 0 ? gz : -gz};
    } else {
        m.gz_focus = {2.0 * m.normalization, 0.0};
    }
}

/// Exact norm integrals by quadrature along both separated coordinates.
[[nodiscard]] inline norm_integrals exact_norm_integrals(const cavity_spec& cav, const mode& m,
                                                         const shoot_options& opt = {}) {
    const auto odes = separated_odes(cav, m.k, m.separation, m.parity());
    norm_integrals I;
    if (cav.is_ellipsoid()) {
        const auto r = integrate<2>(odes.first, detail::prolate_radial_weights{}, {}, opt);
        const auto a = integrate<2>(odes.second, detail::prolate_angular_weights{}, {}, opt);
        I = {r.integrals[0], r.integrals[1], 2.0 * a.integrals[0], 2.0 * a.integrals[1]};
    } else {
        const auto u = integrate<2>(odes.first, detail::parabolic_weights{}, {}, opt);
        const auto v = integrate<2>(odes.second, detail::parabolic_weights{}, {}, opt);
        I = {u.integrals[0], u.integrals[1], v.integrals[0], v.integrals[1]};
    }
    return I;
}

/// Normalizes a mode with exact quadrature (the profile amplitude is
/// irrelevant: the factors are always rescaled to 1 at the focus).
[[nodiscard]] inline mode normalize_mode(mode m, const cavity_spec& cav, const shoot_options& opt = {}) {
    apply_normalization(m, cav, exact_norm_integrals(cav, m, opt));
    return m;
}

// ---------------------------------------------------------------------------
// Field evaluation.

/// Regular factor values at one point: Fr and its partial derivatives.
struct regular_factor {
    double value{0};
    double d_xi{0};
    double d_eta{0};
};

/// Electric profile (cylindrical) and magnetic profile h_phi = k rho Fr.
struct mode_field_sample {
    double e_rho{0};
    double e_z{0};
    double h_phi{0};
};

[[nodiscard]] inline mode_field_sample field_from_regular(const regular_factor& f, const curvilinear_point& q,
                                                          const cavity_spec& cav, double k) {
    const auto pos = meridional_position(q, cav);
    const bool singular = cav.is_ellipsoid() ? (q.xi2m1 + q.one_m_eta2 == 0.0) : (q.xi + q.eta == 0.0);
    if (singular || pos.rho == 0.0) return {0.0, 2.0 * f.value, 0.0};
    const auto g = gradients(q, cav);
    const double d_rho = f.d_xi * g.grad_xi.rho + f.d_eta * g.grad_eta.rho;
    const double d_z = f.d_xi * g.grad_xi.z + f.d_eta * g.grad_eta.z;
    return {-pos.rho * d_z, 2.0 * f.value + pos.rho * d_rho, k * pos.rho * f.value};
}

/// Values of both separated factors at given coordinates (any order).
struct factor_samples {
    std::vector<double> first, d_first;   // along xi (physical derivative)
    std::vector<double> second, d_second; // along eta (physical derivative)
};

[[nodiscard]] inline factor_samples sample_factors(const cavity_spec& cav, const mode& m,
                                                   std::span<const double> xi, std::span<const double> eta,
                                                   const shoot_options& opt = {}) {
    const auto odes = separated_odes(cav, m.k, m.separation, m.parity());
    factor_samples out;

    auto run = [&](const separated_ode& ode, std::span<const double> xs, auto to_x, double dsign,
                   std::vector<double>& val, std::vector<double>& der) {
        std::vector<std::size_t> idx(xs.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::vector<double> x(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) x[i] = std::clamp(to_x(xs[i]), 0.0, ode.length);
        std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x[a] < x[b]; });
        std::vector<double> sorted(xs.size());
        for (std::size_t i = 0; i < idx.size(); ++i) sorted[i] = x[idx[i]];
        const auto s = integrate(ode, detail::no_weights{}, sorted, opt);
        val.assign(xs.size(), 0.0);
        der.assign(xs.size(), 0.0);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            val[idx[i]] = s.sample_y[i];
            der[idx[i]] = dsign * s.sample_dy[i];
        }
    };

    if (cav.is_ellipsoid()) {
        run(odes.first, xi, [](double v) { return v - 1.0; }, 1.0, out.first, out.d_first);
        run(odes.second, eta, [](double v) { return 1.0 - std::abs(v); }, -1.0, out.second, out.d_second);
        // continuation to eta < 0 by parity
        const bool even = m.parity() == 0;
        for (std::size_t i = 0; i < eta.size(); ++i) {
            if (eta[i] >= 0) continue;
            if (even)
                out.d_second[i] = -out.d_second[i];
            else
                out.second[i] = -out.second[i];
        }
    } else {
        run(odes.first, xi, [](double v) { return v; }, 1.0, out.first, out.d_first);
        run(odes.second, eta, [](double v) { return v; }, 1.0, out.second, out.d_second);
    }
    return out;
}

/// Regular factor from separated samples for the normalized mode.
[[nodiscard]] inline regular_factor regular_from_samples(const cavity_spec& cav, const mode& m, double f,
                                                         double df, double g, double dg) {
    const double scale = cav.is_ellipsoid() ? m.normalization / cav.c0() : m.normalization;
    return {scale * f * g, scale * df * g, scale * f * dg};
}

/// g_i(r) as a Cartesian vector.
[[nodiscard]] inline vec3 mode_field_at(const mode& m, const cavity_spec& cav, const vec3& point,
                                        const shoot_options& opt = {}) {
    const auto q = to_curvilinear(point, cav);
    const double xi[1] = {q.xi};
    const double eta[1] = {q.eta};
    const auto s = sample_factors(cav, m, xi, eta, opt);
    const auto f = regular_from_samples(cav, m, s.first[0], s.d_first[0], s.second[0], s.d_second[0]);
    const auto e = field_from_regular(f, q, cav, m.k);
    return to_cartesian({e.e_rho, 0.0, e.e_z}, q.phi);
}

/// z-component of g_i at the focus hosting `atom`.
[[nodiscard]] inline double mode_z_at_focus(const mode& m, const atom_spec& atom) {
    return m.gz_focus[atom.focus_index - 1];
}

// ---------------------------------------------------------------------------
// Exact quantization.

namespace detail {

/// Roots of a monotone increasing phase function theta(k) at the targets
/// bc + j pi inside [k_lo, k_hi]. `phase(k)` is expensive; it is sampled on
/// a coarse grid, each root is started from cubic interpolation of the grid
/// and refined by TOMS 748 on a tightened bracket.
template <class Phase>
std::vector<std::pair<int, double>> phase_roots(Phase&& phase, double bc, double k_lo, double k_hi,
                                                double mismatch_tol) {
    const double pi = std::numbers::pi;
    const double th_lo = phase(k_lo);
    const double th_hi = phase(k_hi);
    const int j_lo = std::max(0, static_cast<int>(std::floor((th_lo - bc) / pi)) + 1);
    const int j_hi = static_cast<int>(std::floor((th_hi - bc) / pi));
    std::vector<std::pair<int, double>> roots;
    if (j_hi < j_lo) return roots;
    const int count = j_hi - j_lo + 1;
    const int samples = std::max(2, count / 2 + 2);
    std::vector<double> ks(samples), th(samples);
    for (int i = 0; i < samples; ++i) {
        ks[i] = k_lo + (k_hi - k_lo) * i / (samples - 1);
        th[i] = i == 0 ? th_lo : (i == samples - 1 ? th_hi : phase(ks[i]));
    }
    // inverse interpolation k(theta) through up to four neighbouring samples
    auto guess = [&](std::size_t seg, double target) {
        const std::size_t first = seg == 0 ? 0 : std::min(seg - 1, ks.size() >= 4 ? ks.size() - 4 : 0);
        const std::size_t last = std::min(ks.size(), first + 4);
        double k = 0;
        for (std::size_t i = first; i < last; ++i) {
            double w = 1;
            for (std::size_t m = first; m < last; ++m)
                if (m != i) w *= (target - th[m]) / (th[i] - th[m]);
            k += w * ks[i];
        }
        return k;
    };
    std::size_t seg = 0;
    for (int j = j_lo; j <= j_hi; ++j) {
        const double target = bc + j * pi;
        // integration noise grows with the accumulated phase
        const double tol_j = std::max(mismatch_tol, 1e-10 * std::abs(target));
        while (seg + 2 < ks.size() && th[seg + 1] < target) ++seg;
        double a = ks[seg], b = ks[seg + 1];
        double fa = th[seg] - target, fb = th[seg + 1] - target;
        if (fa > 0 || fb < 0) {
            // non-monotone noise: fall back to the full interval
            a = k_lo;
            b = k_hi;
            fa = th_lo - target;
            fb = th_hi - target;
        }
        if (fa == 0.0) {
            roots.emplace_back(j, a);
            continue;
        }
        if (fb == 0.0) {
            roots.emplace_back(j, b);
            continue;
        }
        // tighten [a, b] around the interpolated guess, then TOMS 748
        double best = a, best_f = std::abs(fa);
        auto f = [&](double k) {
            const double v = phase(k) - target;
            if (std::abs(v) < best_f) {
                best_f = std::abs(v);
                best = k;
            }
            return v;
        };
        double x = guess(seg, target);
        if (x > a && x < b) {
            const double fx = f(x);
            const double step = 1e-3 * (b - a);
            if (fx < 0) {
                a = x;
                fa = fx;
                const double y = std::min(b, x + step);
                if (y < b) {
                    const double fy = f(y);
                    if (fy >= 0) {
                        b = y;
                        fb = fy;
                    } else {
                        a = y;
                        fa = fy;
                    }
                }
            } else {
                b = x;
                fb = fx;
                const double y = std::max(a, x - step);
                if (y > a) {
                    const double fy = f(y);
                    if (fy <= 0) {
                        a = y;
                        fa = fy;
                    } else {
                        b = y;
                        fb = fy;
                    }
                }
            }
        }
        if (best_f > 1e-3 * tol_j && fa < 0 && fb > 0) {
            std::uintmax_t iters = 100;
            auto tol = [&](double x0, double y0) {
                return best_f <= 1e-3 * tol_j || std::abs(x0 - y0) <= 1e-15 * std::abs(x0);
            };
            (void)boost::math::tools::toms748_solve(f, a, b, fa, fb, tol, iters);
        }
        if (best_f > tol_j)
            throw convergence_error("quantize_exact: eigenfrequency refinement failed (mismatch " +
                                    std::to_string(best_f / tol_j) + " tolerances at k " + std::to_string(best) + ")");
        const double x_root = best;
        roots.emplace_back(j, x_root);
    }
    return roots;
}

/// Parabolic eta problem: beta of channel j at wavenumber k.
class parabolic_channel {
public:
    parabolic_channel(const cavity_spec& cav, int j, const shoot_options& opt) : cav_(cav), j_(j), opt_(opt) {}

    [[nodiscard]] double mismatch(double k, double beta) const {
        const auto o = parabolic_ode(k, beta, -1.0, cav_.eta0());
        return phase_mismatch(o, j_, integrate(o, no_weights{}, {}, opt_).phase);
    }

    /// beta_j(k), from the Chebyshev table when k lies inside it.
    [[nodiscard]] double beta(double k) {
        if (!coeff_.empty() && k >= lo_ && k <= hi_) {
            const double t = (2.0 * k - lo_ - hi_) / (hi_ - lo_);
            return boost::math::chebyshev_clenshaw_recurrence(coeff_.data(), coeff_.size(), t);
        }
        return solve(k);
    }

    /// Tabulates beta_j over [k_lo, k_hi] at Chebyshev nodes, doubling the
    /// order until interpolation matches direct solves at off-node checks.
    void tabulate(double k_lo, double k_hi, double tol = 1e-11) {
        coeff_.clear();
        if (!(k_hi > k_lo)) return;
        const double pi = std::numbers::pi;
        for (int n = 16; n <= 256; n *= 2) {
            std::vector<double> f(n), c(n, 0.0);
            for (int i = 0; i < n; ++i) {
                const double t = std::cos(pi * (i + 0.5) / n);
                f[i] = solve(0.5 * (k_lo + k_hi) + 0.5 * (k_hi - k_lo) * t);
            }
            for (int m = 0; m < n; ++m) {
                double acc = 0;
                for (int i = 0; i < n; ++i) acc += f[i] * std::cos(pi * m * (i + 0.5) / n);
                c[m] = 2.0 * acc / n;
            }
            coeff_ = std::move(c);
            lo_ = k_lo;
            hi_ = k_hi;
            bool ok = true;
            for (double t : {-0.937, -0.31, 0.123, 0.71, 0.999}) {
                const double k = 0.5 * (k_lo + k_hi) + 0.5 * (k_hi - k_lo) * t;
                const double direct = solve(k);
                if (std::abs(beta(k) - direct) > tol * std::max(1.0, std::abs(direct))) ok = false;
            }
            if (ok) return;
        }
        coeff_.clear();
    }

private:
    [[nodiscard]] double solve(double k) {
        double guess = predict(k);
        double step = std::max(1.0, 0.25 * k * k * cav_.eta0() / 8.0);
        double f0 = mismatch(k, guess);
        double lo = guess, hi = guess, flo = f0, fhi = f0;
        for (int it = 0; it < 200; ++it) {
            if (f0 > 0) {
                hi = lo + step;
                fhi = mismatch(k, hi);
                if (fhi <= 0) break;
                lo = hi;
                flo = fhi;
            } else {
                lo = hi - step;
                flo = mismatch(k, lo);
                if (flo >= 0) break;
                hi = lo;
                fhi = flo;
            }
            step *= 2.0;
        }
        if ((flo > 0) == (fhi > 0) && flo != 0 && fhi != 0)
            throw convergence_error("parabolic channel: beta bracket not found");
        std::uintmax_t iters = 200;
        auto f = [&](double b) { return mismatch(k, b); };
        auto tol = [](double a, double b) { return std::abs(a - b) <= 1e-14 * std::max(1.0, std::abs(a)); };
        const auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, iters);
        const double beta = 0.5 * (a + b);
        remember(k, beta);
        return beta;
    }

    double predict(double k) const {
        if (history_.empty()) return 0.0;
        if (history_.size() == 1) return history_.back().second;
        const auto& [k1, b1] = history_[history_.size() - 2];
        const auto& [k2, b2] = history_.back();
        if (k2 == k1) return b2;
        return b2 + (b2 - b1) * (k - k2) / (k2 - k1);
    }
    void remember(double k, double beta) {
        if (!history_.empty() && history_.back().first == k) return;
        history_.emplace_back(k, beta);
        if (history_.size() > 2) history_.erase(history_.begin());
    }

    cavity_spec cav_;
    int j_;
    shoot_options opt_;
    std::vector<std::pair<double, double>> history_;
    std::vector<double> coeff_;
    double lo_{0}, hi_{0};
};

inline void check_window(double omega_min, double omega_max) {
    if (!(omega_min > 0) || !(omega_max > omega_min) || !std::isfinite(omega_max))
        throw domain_error("frequency window must satisfy 0 < omega_min < omega_max < inf");
}

inline void sort_modes(std::vector<mode>& modes) {
    std::sort(modes.begin(), modes.end(), [](const mode& a, const mode& b) {
        if (a.omega != b.omega) return a.omega < b.omega;
        if (a.channel != b.channel) return a.channel < b.channel;
        return a.longitudinal < b.longitudinal;
    });
}

inline mode_basis quantize_exact_ellipsoid(const cavity_spec& cav, const physical_constants& pc, double w_lo,
                                           double w_hi, const quantize_options& opt) {
    const double k_lo = w_lo / pc.c, k_hi = w_hi / pc.c;
    const double c0 = cav.c0();
    mode_basis basis{cav, pc, {}, w_lo, w_hi, provenance::exact, 0};

    // The boundary angle depends on the phase scale, so it is frozen over the window.
    const double scale = prolate_radial_ode(cav, k_hi, 0.0).phase_scale;
    auto radial_phase = [&](int n, double k) {
        const double lam = prolate::eigenvalue(k * c0, n);
        auto o = prolate_radial_ode(cav, k, lam);
        o.phase_scale = scale;
        return integrate(o, no_weights{}, {}, opt.shooting).phase;
    };
    // Coupling estimate of channel n at k (not an eigenfrequency).
    auto coupling_estimate = [&](int n, double k) {
        const auto ang = prolate::solve(k * c0, n);
        const auto r = integrate<2>(prolate_radial_ode(cav, k, ang.lambda), prolate_radial_weights{}, {},
                                    opt.shooting);
        const double fv = ang.focal_value();
        norm_integrals I{r.integrals[0], r.integrals[1], 1.0 / (fv * fv), ang.eta2_moment() / (fv * fv)};
        const double ni = mode_norm_integral(cav, k, I);
        return ni > 0 ? 4.0 / (ni * c0 * c0) : 0.0;
    };

    const double k_mid = 0.5 * (k_lo + k_hi);
    const double bc = prolate_radial_ode(cav, k_hi, 0.0).boundary_angle();
    const double c_hi = k_hi * c0;
    // Focal coupling needs lambda near c^2: below, the angular function is
    // evanescent at eta = 1; above, the radial one is evanescent at xi = 1.
    std::vector<std::pair<int, double>> channels; // (n, coupling estimate)
    double best = 0;
    int below = 0;
    for (int n = 1; n < 100000; ++n) {
        const double th = radial_phase(n, k_hi);
        if (th < bc) break; // no admissible radial mode; lambda grows with n
        double w = 0;
        for (double k : {k_lo, k_mid, k_hi}) w = std::max(w, coupling_estimate(n, k));
        channels.emplace_back(n, w);
        best = std::max(best, w);
        below = w < opt.channel_cutoff * best ? below + 1 : 0;
        if (below >= 3 && prolate::eigenvalue(k_lo * c0, n) > c_hi * c_hi) break;
    }
    std::size_t kept = 0;
    for (const auto& [n, w] : channels) {
        if (w < opt.channel_cutoff * best) continue;
        ++kept;
        auto phase = [&](double k) { return radial_phase(n, k); };
        for (const auto& [j, k] : phase_roots(phase, bc, k_lo, k_hi, opt.mismatch_tol)) {
            mode m;
            m.k = k;
            m.omega = k * pc.c;
            m.channel = n;
            m.longitudinal = j;
            const auto ang = prolate::solve(k * c0, n);
            m.separation = ang.lambda;
            const auto r = integrate<2>(prolate_radial_ode(cav, k, ang.lambda), prolate_radial_weights{}, {},
                                        opt.shooting);
            const double fv = ang.focal_value();
            apply_normalization(m, cav,
                                {r.integrals[0], r.integrals[1], 1.0 / (fv * fv), ang.eta2_moment() / (fv * fv)});
            basis.modes.push_back(m);
            if (basis.modes.size() > opt.max_modes)
                throw domain_error("quantize_exact: window too wide (mode cap exceeded)");
        }
    }
    basis.channels = static_cast<int>(kept);
    sort_modes(basis.modes);
    return basis;
}

inline mode_basis quantize_exact_parabola(const cavity_spec& cav, const physical_constants& pc, double w_lo,
                                          double w_hi, const quantize_options& opt) {
    const double k_lo = w_lo / pc.c, k_hi = w_hi / pc.c;
    mode_basis basis{cav, pc, {}, w_lo, w_hi, provenance::exact, 0};
    const double k_mid = 0.5 * (k_lo + k_hi);
    const auto reference = parabolic_ode(k_hi, 0.0, 1.0, cav.xi_cutoff());
    const double bc = reference.boundary_angle();
    const double scale = reference.phase_scale;

    auto coupling_estimate = [&](double k, double beta) {
        const auto u = integrate<2>(parabolic_ode(k, beta, 1.0, cav.xi_cutoff()), parabolic_weights{}, {},
                                    opt.shooting);
        const auto v = integrate<2>(parabolic_ode(k, beta, -1.0, cav.eta0()), parabolic_weights{}, {},
                                    opt.shooting);
        const double ni = mode_norm_integral(cav, k, {u.integrals[0], u.integrals[1], v.integrals[0], v.integrals[1]});
        return ni > 0 ? 4.0 / ni : 0.0;
    };

    double best = 0;
    int below = 0;
    int kept = 0;
    for (int j = 0; j < 100000 && below < 2; ++j) {
        parabolic_channel ch(cav, j, opt.shooting);
        const double w = coupling_estimate(k_mid, ch.beta(k_mid));
        best = std::max(best, w);
        if (w < opt.channel_cutoff * best) {
            ++below;
            continue;
        }
        below = 0;
        ++kept;
        ch.tabulate(k_lo, k_hi);
        auto phase = [&](double k) {
            auto o = parabolic_ode(k, ch.beta(k), 1.0, cav.xi_cutoff());
            o.phase_scale = scale;
            return integrate(o, no_weights{}, {}, opt.shooting).phase;
        };
        for (const auto& [m_idx, k] : phase_roots(phase, bc, k_lo, k_hi, opt.mismatch_tol)) {
            mode m;
            m.k = k;
            m.omega = k * pc.c;
            m.channel = j;
            m.longitudinal = m_idx;
            m.separation = ch.beta(k);
            m = normalize_mode(m, cav, opt.shooting);
            basis.modes.push_back(m);
            if (basis.modes.size() > opt.max_modes)
                throw domain_error("quantize_exact: window too wide (mode cap exceeded)");
        }
    }
    basis.channels = kept;
    sort_modes(basis.modes);
    return basis;
}

} // namespace detail

/// All coupled modes with omega in [omega_min, omega_max].
[[nodiscard]] inline mode_basis quantize_exact(const cavity_spec& cav, const physical_constants& pc,
                                               double omega_min, double omega_max,
                                               const quantize_options& opt = {}) {
    cav.validate();
    pc.validate();
    detail::check_window(omega_min, omega_max);
    if (cav.is_ellipsoid()) return detail::quantize_exact_ellipsoid(cav, pc, omega_min, omega_max, opt);
    return detail::quantize_exact_parabola(cav, pc, omega_min, omega_max, opt);
}

/// Number of modes per channel.
[[nodiscard]] inline std::vector<std::pair<int, int>> modes_per_channel(const mode_basis& b) {
    std::vector<std::pair<int, int>> out;
    for (const auto& m : b.modes) {
        auto it = std::find_if(out.begin(), out.end(), [&](auto& p) { return p.first == m.channel; });
        if (it == out.end())
            out.emplace_back(m.channel, 1);
        else
            ++it->second;
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Mean spacing of the coupled spectrum in [lo, hi].
[[nodiscard]] inline double mean_spacing(const mode_basis& b, double lo, double hi) {
    const auto n = std::count_if(b.modes.begin(), b.modes.end(),
                                 [&](const mode& m) { return m.omega >= lo && m.omega <= hi; });
    if (n < 2) throw convergence_error("mean_spacing: fewer than two modes in range");
    return (hi - lo) / static_cast<double>(n);
}

} // namespace cavityqed
