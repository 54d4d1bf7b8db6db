#pragma once

// Laplace-domain kernels of the one-excitation problem.
//
//   A^{ab}(s) = sum_j kappa_{a j} kappa_{b j} / (s + i omega_j),
//   kappa_{a j} = sqrt(omega_j / (2 eps0 hbar)) D g_jz(x_a),
//   T1^{ab}(s) = A^{ab}(s) - delta_ab Gamma_free / 2.

#include "cavityqed/errors.hpp"
#include "cavityqed/geometry.hpp"
#include "cavityqed/modes.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

namespace cavityqed {

using cplx = std::complex<double>;

/// Weisskopf-Wigner rate omega^3 D^2 / (3 pi eps0 hbar c^3).
[[nodiscard]] inline double gamma_free(double omega_eg, double dipole, const physical_constants& pc) {
    if (!(omega_eg > 0)) throw domain_error("gamma_free: omega_eg must be positive");
    return omega_eg * omega_eg * omega_eg * dipole * dipole /
           (3.0 * std::numbers::pi * pc.epsilon0 * pc.hbar * pc.c * pc.c * pc.c);
}

[[nodiscard]] inline double gamma_free(const atom_spec& atom, const physical_constants& pc) {
    return gamma_free(atom.omega_eg, atom.dipole, pc);
}

/// Kernel value with the estimated contribution of modes outside the basis.
struct kernel_value {
    cplx value;
    double tail{0};
};

class kernel_matrix {
public:
    kernel_matrix(const mode_basis& basis, std::vector<atom_spec> atoms)
        : constants_(basis.constants), atoms_(std::move(atoms)) {
        if (atoms_.empty() || atoms_.size() > 2) throw config_error("one or two atoms are supported");
        for (const auto& a : atoms_) a.validate(basis.cavity);
        if (atoms_.size() == 2) {
            if (atoms_[0].focus_index == atoms_[1].focus_index) throw config_error("atoms must occupy distinct foci");
            if (atoms_[0].omega_eg != atoms_[1].omega_eg || atoms_[0].dipole != atoms_[1].dipole)
                throw config_error("atoms must be identical");
        }
        omega_min_ = basis.omega_min;
        omega_max_ = basis.omega_max;
        omega_.reserve(basis.modes.size());
        for (std::size_t a = 0; a < atoms_.size(); ++a) kappa_[a].reserve(basis.modes.size());
        for (const auto& m : basis.modes) {
            omega_.push_back(m.omega);
            const double amp = std::sqrt(m.omega / (2.0 * constants_.epsilon0 * constants_.hbar));
            for (std::size_t a = 0; a < atoms_.size(); ++a)
                kappa_[a].push_back(amp * atoms_[a].dipole * mode_z_at_focus(m, atoms_[a]));
        }
        gamma_free_ = cavityqed::gamma_free(atoms_[0], constants_);
    }

    [[nodiscard]] std::size_t atoms() const { return atoms_.size(); }
    [[nodiscard]] std::size_t modes() const { return omega_.size(); }
    [[nodiscard]] const atom_spec& atom(std::size_t a) const { return atoms_.at(a); }
    [[nodiscard]] double gamma_free() const { return gamma_free_; }
    [[nodiscard]] double omega_eg() const { return atoms_[0].omega_eg; }
    [[nodiscard]] const physical_constants& constants() const { return constants_; }
    [[nodiscard]] std::span<const double> omega() const { return omega_; }
    [[nodiscard]] std::span<const double> kappa(std::size_t a) const { return kappa_.at(a); }
    [[nodiscard]] double window_low() const { return omega_min_; }
    [[nodiscard]] double window_high() const { return omega_max_; }

    /// Minimal admissible |s + i omega_j| relative to the smallest mode spacing.
    double pole_tolerance{1e-12};

    /// A^{ab}(s) with a tail estimate from the coupling density at the window edges.
    [[nodiscard]] kernel_value A(std::size_t a, std::size_t b, cplx s) const {
        check(a, b);
        cplx sum = 0;
        const auto& ka = kappa_[a];
        const auto& kb = kappa_[b];
        for (std::size_t j = 0; j < omega_.size(); ++j) {
            const cplx den = s + cplx(0.0, omega_[j]);
            if (std::abs(den) < pole_tolerance * std::max(1.0, omega_[j]))
                throw domain_error("kernel_A: s lies on a mode pole");
            sum += ka[j] * kb[j] / den;
        }
        return {sum, tail_bound(a, b, s)};
    }

    [[nodiscard]] kernel_value T1(std::size_t a, std::size_t b, cplx s) const {
        auto v = A(a, b, s);
        if (a == b) v.value -= 0.5 * gamma_free_;
        return v;
    }

    /// Dissipative part of the omitted modes, assuming the coupling density
    /// at each window edge continues beyond it. The reactive part is a nearly
    /// constant frequency shift and is not included.
    [[nodiscard]] double tail_bound(std::size_t a, std::size_t b, cplx s) const {
        if (omega_.size() < 8) return 0.0;
        const auto [lo_density, hi_density] = edge_densities(a, b);
        const double nu = -s.imag(), g = std::max(std::abs(s.real()), 1e-300);
        auto beyond = [&](double distance) { return 0.5 * std::numbers::pi - std::atan(distance / g); };
        return std::abs(lo_density) * beyond(nu - omega_min_) + std::abs(hi_density) * beyond(omega_max_ - nu);
    }

    /// Coupling densities sum(kappa_a kappa_b) / band near the lower and upper window edges.
    [[nodiscard]] std::pair<double, double> edge_densities(std::size_t a, std::size_t b) const {
        check(a, b);
        const double band = 0.1 * (omega_max_ - omega_min_);
        double lo = 0, hi = 0;
        for (std::size_t j = 0; j < omega_.size(); ++j) {
            const double w = kappa_[a][j] * kappa_[b][j];
            if (omega_[j] < omega_min_ + band) lo += w;
            if (omega_[j] > omega_max_ - band) hi += w;
        }
        return {lo / band, hi / band};
    }

private:
    void check(std::size_t a, std::size_t b) const {
        if (a >= atoms_.size() || b >= atoms_.size()) throw domain_error("kernel: atom index out of range");
    }

    physical_constants constants_;
    std::vector<atom_spec> atoms_;
    double gamma_free_{0};
    double omega_min_{0}, omega_max_{0};
    std::vector<double> omega_;
    std::array<std::vector<double>, 2> kappa_;
};

/// Kernel built directly from frequencies and couplings (tests, free-space emulation).
[[nodiscard]] inline mode_basis synthetic_basis(const cavity_spec& cav, const physical_constants& pc,
                                                std::span<const double> omega, std::span<const double> gz1,
                                                std::span<const double> gz2 = {}) {
    mode_basis b{cav, pc, {}, omega.empty() ? 0.0 : omega.front(), omega.empty() ? 0.0 : omega.back(),
                 provenance::exact, 1};
    for (std::size_t i = 0; i < omega.size(); ++i) {
        mode m;
        m.omega = omega[i];
        m.k = omega[i] / pc.c;
        m.channel = 1;
        m.longitudinal = static_cast<int>(i);
        m.gz_focus = {gz1[i], gz2.empty() ? 0.0 : gz2[i]};
        m.normalization = 1.0;
        b.modes.push_back(m);
    }
    if (!b.modes.empty()) {
        b.omega_min = std::min_element(omega.begin(), omega.end())[0];
        b.omega_max = std::max_element(omega.begin(), omega.end())[0];
    }
    return b;
}

// ---------------------------------------------------------------------------
// Parabolic closed form.

/// int_0^u sin^2(y) / y dy.
[[nodiscard]] inline double S_integral(double u) {
    if (!(u >= 0)) throw domain_error("S_integral: u must be non-negative");
    if (u == 0) return 0.0;
    if (u < 1e-3) {
        const double u2 = u * u;
        return u2 / 2.0 - u2 * u2 / 12.0 + u2 * u2 * u2 / 135.0;
    }
    auto f = [](double y) {
        if (y == 0.0) return 0.0;
        const double s = std::sin(y);
        return s * s / y;
    };
    using gk = boost::math::quadrature::gauss_kronrod<double, 31>;
    double total = 0;
    const double panel = std::numbers::pi;
    for (double a = 0; a < u; a += panel) total += gk::integrate(f, a, std::min(u, a + panel), 10, 1e-15);
    return total;
}

struct purcell_series {
    double ratio{1};
    double last_term{0};
    int terms{0};
};

/// Gamma / Gamma_free = 1 + 2 sum_M 3 cos[2M(u - pi/2)] (2MS coth(2MS) - 1) / sinh^2(2MS), S = S(u).
/// With m_max = 0 the sum runs until the last term drops below 1e-10 of the running value.
[[nodiscard]] inline purcell_series purcell_parabolic_semiclassical(double u, int m_max = 0) {
    if (!(u > 0)) throw domain_error("purcell_parabolic_semiclassical: u must be positive");
    const double S = S_integral(u);
    purcell_series out;
    double sum = 1.0;
    const int limit = m_max > 0 ? m_max : 1000000;
    for (int M = 1; M <= limit; ++M) {
        const double x = 2.0 * M * S;
        double shape;
        if (x > 350.0) {
            shape = 0.0;
        } else {
            const double sh = std::sinh(x);
            shape = (x / std::tanh(x) - 1.0) / (sh * sh);
        }
        const double term = 2.0 * 3.0 * std::cos(2.0 * M * (u - 0.5 * std::numbers::pi)) * shape;
        sum += term;
        out.last_term = std::abs(term);
        out.terms = M;
        // the envelope decays monotonically; the cosine may vanish accidentally
        if (m_max == 0 && 6.0 * shape < 1e-10 * std::abs(sum)) break;
    }
    out.ratio = sum;
    return out;
}

// ---------------------------------------------------------------------------
// Pole approximation.

struct pole_rate {
    double gamma{0};     ///< 2 Re A^{aa}(eps - i omega_eg), tail corrected
    double tail{0};      ///< tail correction that was added
    double epsilon{0};
};

/// Coupling-weighted mean spacing of the modes within `band` of omega:
/// band / N_eff with the participation number N_eff = (sum k^2)^2 / sum k^4.
[[nodiscard]] inline double effective_spacing(const kernel_matrix& km, std::size_t a, double omega, double band) {
    double s2 = 0, s4 = 0;
    const auto w = km.omega();
    const auto k = km.kappa(a);
    for (std::size_t j = 0; j < w.size(); ++j) {
        if (std::abs(w[j] - omega) > band) continue;
        const double q = k[j] * k[j];
        s2 += q;
        s4 += q * q;
    }
    if (s4 == 0) throw convergence_error("effective_spacing: no coupled modes near the transition");
    return 2.0 * band / (s2 * s2 / s4);
}

/// Pole rate restricted to modes with |omega_j - omega_eg| <= half_width,
/// plus the Lorentzian tail of a constant coupling density beyond.
[[nodiscard]] inline pole_rate purcell_pole(const kernel_matrix& km, std::size_t a, double epsilon,
                                            double half_width = 0.0) {
    if (!(epsilon > 0)) throw domain_error("purcell_pole: epsilon must be positive");
    const double w0 = km.omega_eg();
    const double lo = half_width > 0 ? w0 - half_width : km.window_low();
    const double hi = half_width > 0 ? w0 + half_width : km.window_high();
    if (lo < km.window_low() - 1e-12 * w0 || hi > km.window_high() + 1e-12 * w0)
        throw domain_error("purcell_pole: requested window exceeds the basis");
    const auto w = km.omega();
    const auto k = km.kappa(a);
    double sum = 0, edge_lo = 0, edge_hi = 0;
    const double band = 0.1 * (hi - lo);
    const bool extrapolate = band > 0 && w.size() >= 8;
    for (std::size_t j = 0; j < w.size(); ++j) {
        if (w[j] < lo || w[j] > hi) continue;
        const double d = w[j] - w0;
        const double q = k[j] * k[j];
        sum += q * epsilon / (epsilon * epsilon + d * d);
        if (w[j] < lo + band) edge_lo += q;
        if (w[j] > hi - band) edge_hi += q;
    }
    // int_{|d| > W} eps / (eps^2 + d^2) dd for each side
    if (!extrapolate) edge_lo = edge_hi = 0.0;
    const double t_lo = (edge_lo / std::max(band, 1e-300)) * (0.5 * std::numbers::pi - std::atan((w0 - lo) / epsilon));
    const double t_hi = (edge_hi / std::max(band, 1e-300)) * (0.5 * std::numbers::pi - std::atan((hi - w0) / epsilon));
    pole_rate r;
    r.epsilon = epsilon;
    r.tail = 2.0 * (t_lo + t_hi);
    r.gamma = 2.0 * sum + r.tail;
    return r;
}

struct pole_certificate {
    pole_rate rate;     ///< epsilon, full window
    pole_rate doubled;  ///< 2 epsilon, full window
    pole_rate narrow;   ///< epsilon, half window
    double epsilon_change{0}; ///< |G(eps) - G(2 eps)| / G(eps)
    double window_change{0};  ///< |G(W) - G(W / 2)| / G(W)
    bool converged{false};
};

/// Pole rate with the epsilon-doubling and window-halving checks.
[[nodiscard]] inline pole_certificate purcell_pole_certified(const kernel_matrix& km, std::size_t a,
                                                             double epsilon, double half_width,
                                                             double epsilon_tol = 0.05, double window_tol = 0.005) {
    pole_certificate c;
    c.rate = purcell_pole(km, a, epsilon, half_width);
    c.doubled = purcell_pole(km, a, 2.0 * epsilon, half_width);
    c.narrow = purcell_pole(km, a, epsilon, 0.5 * half_width);
    c.epsilon_change = std::abs(c.rate.gamma - c.doubled.gamma) / c.rate.gamma;
    c.window_change = std::abs(c.rate.gamma - c.narrow.gamma) / c.rate.gamma;
    c.converged = c.epsilon_change <= epsilon_tol && c.window_change <= window_tol;
    return c;
}

} // namespace cavityqed
