#pragma once

// Cavity geometry: parabolic and prolate-ellipsoidal coordinates.
//
// Parabolic coordinates (focus at the origin, mirror opening towards +z):
//     z = (xi - eta) / 2,    rho = sqrt(xi * eta)
// The mirror is the surface eta = 2 f, its vertex sits at z = -f. The
// half-open cavity is closed by an artificial confocal wall at xi = xi_cutoff.
//
// Prolate ellipsoidal coordinates (foci at z = +-c0, c0 = d/2):
//     z = c0 xi eta,    rho = c0 sqrt((xi^2 - 1)(1 - eta^2))
// The wall is xi = xi0 = a / c0 with semi-major axis a = d/2 + f.

#include "cavityqed/errors.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace cavityqed {

using vec3 = std::array<double, 3>;

/// Components in the meridional plane: (rho, z).
struct meridional {
    double rho{0};
    double z{0};
};

struct physical_constants {
    double c{1.0};
    double hbar{1.0};
    double epsilon0{1.0};

    void validate() const {
        if (!(c > 0) || !(hbar > 0) || !(epsilon0 > 0))
            throw config_error("physical constants must be strictly positive");
    }
    [[nodiscard]] double mu0() const { return 1.0 / (epsilon0 * c * c); }
};

struct parabolic {
    double focal_length{1.0};
    double xi_cutoff{100.0};
};

struct prolate_ellipsoid {
    double interfocal_d{1.0};
    double vertex_gap_f{1.0};
};

/// Minimal ratio xi_cutoff / focal_length accepted for the regularized parabola.
inline constexpr double min_cutoff_ratio = 10.0;

class cavity_spec {
public:
    cavity_spec() = default;
    cavity_spec(parabolic p) : shape_(p) { validate(); }
    cavity_spec(prolate_ellipsoid e) : shape_(e) { validate(); }

    [[nodiscard]] bool is_parabolic() const { return std::holds_alternative<parabolic>(shape_); }
    [[nodiscard]] bool is_ellipsoid() const { return std::holds_alternative<prolate_ellipsoid>(shape_); }
    [[nodiscard]] const parabolic& as_parabolic() const { return std::get<parabolic>(shape_); }
    [[nodiscard]] const prolate_ellipsoid& as_ellipsoid() const { return std::get<prolate_ellipsoid>(shape_); }

    void validate() const {
        if (const auto* p = std::get_if<parabolic>(&shape_)) {
            if (!(p->focal_length > 0) || !(p->xi_cutoff > 0))
                throw config_error("parabolic cavity lengths must be positive");
            if (!(p->xi_cutoff > min_cutoff_ratio * p->focal_length))
                throw config_error("xi_cutoff must exceed 10 focal lengths");
        } else {
            const auto& e = std::get<prolate_ellipsoid>(shape_);
            if (!(e.interfocal_d > 0) || !(e.vertex_gap_f > 0))
                throw config_error("ellipsoid lengths must be positive");
        }
    }

    // Parabola: boundary value of eta on the mirror.
    [[nodiscard]] double eta0() const { return 2.0 * as_parabolic().focal_length; }
    [[nodiscard]] double xi_cutoff() const { return as_parabolic().xi_cutoff; }

    // Ellipsoid.
    [[nodiscard]] double c0() const { return 0.5 * as_ellipsoid().interfocal_d; }
    [[nodiscard]] double semi_major() const {
        const auto& e = as_ellipsoid();
        return 0.5 * e.interfocal_d + e.vertex_gap_f;
    }
    [[nodiscard]] double xi0() const { return semi_major() / c0(); }

    /// Focus-to-focus travel length via one wall reflection (ellipsoid), or
    /// focus-vertex-focus for the parabola.
    [[nodiscard]] double shortest_return_path() const {
        if (is_parabolic()) return 2.0 * as_parabolic().focal_length;
        const auto& e = as_ellipsoid();
        return e.interfocal_d + 2.0 * e.vertex_gap_f;
    }

    /// Uniform dilation by `factor`.
    [[nodiscard]] cavity_spec scaled(double factor) const {
        if (is_parabolic()) {
            auto p = as_parabolic();
            return parabolic{p.focal_length * factor, p.xi_cutoff * factor};
        }
        auto e = as_ellipsoid();
        return prolate_ellipsoid{e.interfocal_d * factor, e.vertex_gap_f * factor};
    }

private:
    std::variant<parabolic, prolate_ellipsoid> shape_{prolate_ellipsoid{}};
};

struct atom_spec {
    int focus_index{1};
    double omega_eg{1.0};
    double dipole{1.0};

    void validate(const cavity_spec& cav) const {
        if (focus_index != 1 && focus_index != 2)
            throw config_error("focus_index must be 1 or 2");
        if (cav.is_parabolic() && focus_index != 1)
            throw config_error("the parabolic cavity has a single focus");
        if (!(omega_eg > 0) || !(dipole > 0))
            throw config_error("omega_eg and dipole must be positive");
    }
};

/// Cartesian focus position; focus 1 sits at +c0 for the ellipsoid.
[[nodiscard]] inline vec3 focus_position(const cavity_spec& cav, int focus_index) {
    if (cav.is_parabolic()) {
        if (focus_index != 1) throw domain_error("parabola has one focus");
        return {0.0, 0.0, 0.0};
    }
    if (focus_index != 1 && focus_index != 2) throw domain_error("focus index must be 1 or 2");
    return {0.0, 0.0, focus_index == 1 ? cav.c0() : -cav.c0()};
}

[[nodiscard]] inline vec3 atom_position(const cavity_spec& cav, const atom_spec& atom) {
    return focus_position(cav, atom.focus_index);
}

/// A point in the symmetry adapted coordinates.
///
/// For the ellipsoid `xi2m1` and `one_m_eta2` carry xi^2-1 and 1-eta^2
/// without cancellation; the axis and the foci are reconstructed from them.
/// For the parabola they mirror xi and eta.
struct curvilinear_point {
    double xi{0};
    double eta{0};
    double phi{0};
    double xi2m1{0};
    double one_m_eta2{0};
};

[[nodiscard]] inline curvilinear_point make_prolate_point(double xi, double eta, double phi = 0.0) {
    return {xi, eta, phi, (xi - 1.0) * (xi + 1.0), (1.0 - eta) * (1.0 + eta)};
}

[[nodiscard]] inline curvilinear_point make_parabolic_point(double xi, double eta, double phi = 0.0) {
    return {xi, eta, phi, xi, eta};
}

namespace detail {

inline constexpr double boundary_slack = 1e-12;

inline double azimuth(const vec3& p) {
    if (p[0] == 0.0 && p[1] == 0.0) return 0.0;
    return std::atan2(p[1], p[0]);
}

} // namespace detail

[[nodiscard]] inline curvilinear_point to_parabolic(const vec3& p, const cavity_spec& cav) {
    if (!cav.is_parabolic()) throw domain_error("to_parabolic requires a parabolic cavity");
    const double rho = std::hypot(p[0], p[1]);
    const double z = p[2];
    const double r = std::hypot(rho, z);
    double xi, eta;
    // xi = r + z, eta = r - z; the smaller one is formed without cancellation.
    if (z >= 0) {
        xi = r + z;
        eta = xi > 0 ? rho * rho / xi : 0.0;
    } else {
        eta = r - z;
        xi = rho * rho / eta;
    }
    const double scale = std::max(1.0, r);
    if (eta > cav.eta0() + detail::boundary_slack * scale || xi > cav.xi_cutoff() + detail::boundary_slack * scale)
        throw domain_error("point outside the parabolic cavity");
    return make_parabolic_point(xi, eta, detail::azimuth(p));
}

[[nodiscard]] inline vec3 from_parabolic(const curvilinear_point& q) {
    const double rho = std::sqrt(q.xi * q.eta);
    return {rho * std::cos(q.phi), rho * std::sin(q.phi), 0.5 * (q.xi - q.eta)};
}

[[nodiscard]] inline curvilinear_point to_prolate(const vec3& p, const cavity_spec& cav) {
    if (!cav.is_ellipsoid()) throw domain_error("to_prolate requires an ellipsoidal cavity");
    const double c0 = cav.c0();
    const double rho = std::hypot(p[0], p[1]);
    const double z = p[2];
    const double r1 = std::hypot(rho, z - c0);
    const double r2 = std::hypot(rho, z + c0);
    const double sum = r1 + r2;
    const double xi = sum / (2.0 * c0);
    const double eta = std::clamp(2.0 * z / sum, -1.0, 1.0);
    // r1 r2 - |c0^2 - z^2| without cancellation near the axis.
    const double rho2 = rho * rho;
    const double defect =
        rho2 == 0.0 ? 0.0 : rho2 * (rho2 + 2.0 * z * z + 2.0 * c0 * c0) / (r1 * r2 + std::abs(c0 * c0 - z * z));
    double xi2m1, one_m_eta2;
    if (std::abs(z) < c0) {
        // r1 r2 + z^2 - c0^2 = defect
        xi2m1 = (2.0 * rho2 + 2.0 * defect) / (4.0 * c0 * c0);
        one_m_eta2 = 2.0 * (rho2 + c0 * c0 - z * z + r1 * r2) / (sum * sum);
    } else {
        xi2m1 = (2.0 * rho2 + 2.0 * (r1 * r2 + z * z - c0 * c0)) / (4.0 * c0 * c0);
        // r1 r2 + c0^2 - z^2 = defect
        one_m_eta2 = 2.0 * (rho2 + defect) / (sum * sum);
    }
    if (xi > cav.xi0() * (1.0 + detail::boundary_slack))
        throw domain_error("point outside the ellipsoidal cavity");
    return {xi, eta, detail::azimuth(p), xi2m1, one_m_eta2};
}

[[nodiscard]] inline vec3 from_prolate(const curvilinear_point& q, const cavity_spec& cav) {
    const double c0 = cav.c0();
    const double rho = c0 * std::sqrt(q.xi2m1 * q.one_m_eta2);
    return {rho * std::cos(q.phi), rho * std::sin(q.phi), c0 * q.xi * q.eta};
}

[[nodiscard]] inline curvilinear_point to_curvilinear(const vec3& p, const cavity_spec& cav) {
    return cav.is_parabolic() ? to_parabolic(p, cav) : to_prolate(p, cav);
}

[[nodiscard]] inline vec3 from_curvilinear(const curvilinear_point& q, const cavity_spec& cav) {
    return cav.is_parabolic() ? from_parabolic(q) : from_prolate(q, cav);
}

[[nodiscard]] inline meridional meridional_position(const curvilinear_point& q, const cavity_spec& cav) {
    if (cav.is_parabolic()) return {std::sqrt(q.xi * q.eta), 0.5 * (q.xi - q.eta)};
    const double c0 = cav.c0();
    return {c0 * std::sqrt(q.xi2m1 * q.one_m_eta2), c0 * q.xi * q.eta};
}

/// True when the meridional point (rho >= 0, z) lies inside the closed cavity.
[[nodiscard]] inline bool inside(const cavity_spec& cav, double rho, double z) {
    if (cav.is_parabolic()) {
        const double r = std::hypot(rho, z);
        return r - z <= cav.eta0() && r + z <= cav.xi_cutoff();
    }
    const double c0 = cav.c0();
    const double sum = std::hypot(rho, z - c0) + std::hypot(rho, z + c0);
    return sum <= 2.0 * cav.semi_major();
}

/// Metric scale factors (h_xi, h_eta, h_phi).
[[nodiscard]] inline vec3 scale_factors(const curvilinear_point& q, const cavity_spec& cav) {
    if (cav.is_parabolic()) {
        const double s = q.xi + q.eta;
        return {std::sqrt(s / (4.0 * q.xi)), std::sqrt(s / (4.0 * q.eta)), std::sqrt(q.xi * q.eta)};
    }
    const double c0 = cav.c0();
    const double x2e2 = q.xi2m1 + q.one_m_eta2; // xi^2 - eta^2
    return {c0 * std::sqrt(x2e2 / q.xi2m1), c0 * std::sqrt(x2e2 / q.one_m_eta2),
            c0 * std::sqrt(q.xi2m1 * q.one_m_eta2)};
}

/// Gradients of the two coordinates as (rho, z) vectors. Finite everywhere
/// except at the coordinate singular points (foci).
struct coordinate_gradients {
    meridional grad_xi;
    meridional grad_eta;
};

[[nodiscard]] inline coordinate_gradients gradients(const curvilinear_point& q, const cavity_spec& cav) {
    if (cav.is_parabolic()) {
        const double s = q.xi + q.eta;
        const double rho = std::sqrt(q.xi * q.eta);
        return {{2.0 * rho / s, 2.0 * q.xi / s}, {2.0 * rho / s, -2.0 * q.eta / s}};
    }
    const double c0 = cav.c0();
    const double den = c0 * (q.xi2m1 + q.one_m_eta2);
    const double root = std::sqrt(q.xi2m1 * q.one_m_eta2);
    return {{q.xi * root / den, q.eta * q.xi2m1 / den}, {-q.eta * root / den, q.xi * q.one_m_eta2 / den}};
}

/// Electric field samples of g = curl(e_phi F(xi) G(eta)), cylindrical
/// components; the azimuthal component vanishes identically.
struct azimuthal_curl_sample {
    double e_rho{0};
    double e_phi{0};
    double e_z{0};
};

/// Samples of F, F', G, G' taken at the coordinates of the same index.
struct separable_samples {
    std::span<const double> f, df, g, dg;
};

[[nodiscard]] inline std::vector<azimuthal_curl_sample> curl_of_azimuthal_field(
    const separable_samples& s, std::span<const curvilinear_point> coords, const cavity_spec& cav) {
    const auto n = coords.size();
    if (s.f.size() != n || s.df.size() != n || s.g.size() != n || s.dg.size() != n)
        throw domain_error("curl_of_azimuthal_field: sample and coordinate grids differ in size");
    std::vector<azimuthal_curl_sample> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto gr = gradients(coords[i], cav);
        const double psi = s.f[i] * s.g[i];
        const double a = s.df[i] * s.g[i];
        const double b = s.f[i] * s.dg[i];
        const double d_rho = a * gr.grad_xi.rho + b * gr.grad_eta.rho;
        const double d_z = a * gr.grad_xi.z + b * gr.grad_eta.z;
        const double rho = meridional_position(coords[i], cav).rho;
        // (1/rho) d(rho psi)/drho; on the axis psi vanishes and the limit is 2 dpsi/drho.
        const double e_z = rho > 0 ? psi / rho + d_rho : 2.0 * d_rho;
        out[i] = {-d_z, 0.0, e_z};
    }
    return out;
}

/// Converts a cylindrical field sample to Cartesian components.
[[nodiscard]] inline vec3 to_cartesian(const azimuthal_curl_sample& e, double phi) {
    return {e.e_rho * std::cos(phi), e.e_rho * std::sin(phi), e.e_z};
}

} // namespace cavityqed
