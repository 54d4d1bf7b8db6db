#pragma once

// Normally ordered energy density of the one-photon part of the state,
//
//   E+ = i sum_j sqrt(hbar omega_j / 2 eps0) phi_j g_j,
//   B+ =   sum_j sqrt(hbar omega_j / 2 eps0) phi_j h_j / c,   h_j = curl(g_j) / k_j,
//   w  = eps0 |E+|^2 + |B+|^2 / mu0.

#include "cavityqed/dynamics.hpp"
#include "cavityqed/errors.hpp"
#include "cavityqed/geometry.hpp"
#include "cavityqed/modes.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

namespace cavityqed {

struct grid_spec {
    double rho_max{1.0};
    double z_min{-1.0};
    double z_max{1.0};
    std::size_t n_rho{121};
    std::size_t n_z{121};
    bool electric_only{false};

    void validate() const {
        if (!(rho_max > 0) || !(z_max > z_min)) throw config_error("grid extents must be positive");
        if (n_rho < 2 || n_z < 2) throw config_error("grid resolution must be at least 2 x 2");
        if (n_rho * n_z > max_points) throw config_error("grid resolution cap exceeded");
    }
    [[nodiscard]] double rho_at(std::size_t i) const {
        return -rho_max + 2.0 * rho_max * static_cast<double>(i) / static_cast<double>(n_rho - 1);
    }
    [[nodiscard]] double z_at(std::size_t i) const {
        return z_min + (z_max - z_min) * static_cast<double>(i) / static_cast<double>(n_z - 1);
    }

    static constexpr std::size_t max_points = 4000000;
};

/// Whole meridional section of the cavity (parabola: out to a few focal lengths).
[[nodiscard]] inline grid_spec default_grid(const cavity_spec& cav, std::size_t n_rho, std::size_t n_z) {
    grid_spec g;
    g.n_rho = n_rho;
    g.n_z = n_z;
    if (cav.is_ellipsoid()) {
        const double a = cav.semi_major(), c0 = cav.c0();
        g.rho_max = std::sqrt(a * a - c0 * c0);
        g.z_min = -a;
        g.z_max = a;
    } else {
        const double f = cav.as_parabolic().focal_length;
        g.rho_max = 4.0 * f;
        g.z_min = -f;
        g.z_max = 4.0 * f;
    }
    return g;
}

/// Snapshot density unit 3 pi hbar omega_eg Gamma_free / (80 d^2 c); d is the
/// interfocal distance of the ellipsoid or the focal length of the parabola.
[[nodiscard]] inline double density_unit(const kernel_matrix& km, const cavity_spec& cav) {
    const double d = cav.is_ellipsoid() ? cav.as_ellipsoid().interfocal_d : cav.as_parabolic().focal_length;
    const auto& pc = km.constants();
    return 3.0 * std::numbers::pi * pc.hbar * km.omega_eg() * km.gamma_free() / (80.0 * d * d * pc.c);
}

struct field_snapshot {
    double t{0};
    double tau{0};
    double unit_scale{1};
    grid_spec grid;
    double mask_sentinel{-1.0};
    /// Row-major, n_z rows of n_rho values, in units of unit_scale.
    std::vector<double> density;
    std::array<meridional, 2> foci{};
    std::size_t modes_used{0};
    double dropped_weight{0};
};

namespace detail {

struct field_point {
    double rho{0};
    meridional gxi, geta;
    bool singular{false};
    std::size_t ixi{0}, ieta{0};
};

struct field_points {
    std::vector<double> xi, eta;
    std::vector<field_point> pts;

    /// Point with its own coordinate samples.
    void add(const curvilinear_point& q, const cavity_spec& cav) {
        add(q, cav, xi.size(), eta.size());
        xi.push_back(q.xi);
        eta.push_back(q.eta);
    }

    /// Point sharing coordinate samples already listed at (ixi, ieta).
    void add(const curvilinear_point& q, const cavity_spec& cav, std::size_t ixi, std::size_t ieta) {
        field_point p;
        p.rho = meridional_position(q, cav).rho;
        p.singular = cav.is_ellipsoid() ? (q.xi2m1 + q.one_m_eta2 == 0.0) : (q.xi + q.eta == 0.0);
        if (!p.singular) {
            const auto g = gradients(q, cav);
            p.gxi = g.grad_xi;
            p.geta = g.grad_eta;
        }
        p.ixi = ixi;
        p.ieta = ieta;
        pts.push_back(p);
    }
};

/// Complex field components of all frames at all points.
struct frame_fields {
    std::vector<cplx> e_rho, e_z, b_phi; // [frame * points + point]
};

inline frame_fields accumulate_fields(const cavity_spec& cav, const physical_constants& pc,
                                      std::span<const mode> modes, std::span<const std::size_t> used,
                                      const std::vector<std::vector<cplx>>& phi, const field_points& fp,
                                      const shoot_options& opt) {
    const std::size_t F = phi.size(), P = fp.pts.size();
    frame_fields out;
    out.e_rho.assign(F * P, 0.0);
    out.e_z.assign(F * P, 0.0);
    out.b_phi.assign(F * P, 0.0);
    const cplx I(0.0, 1.0);
    std::vector<cplx> ce(F), cb(F);
    for (std::size_t j : used) {
        const mode& m = modes[j];
        const auto s = sample_factors(cav, m, fp.xi, fp.eta, opt);
        const double amp = std::sqrt(pc.hbar * m.omega / (2.0 * pc.epsilon0));
        for (std::size_t f = 0; f < F; ++f) {
            ce[f] = I * amp * phi[f][j];
            cb[f] = amp * phi[f][j] / pc.c;
        }
        for (std::size_t p = 0; p < P; ++p) {
            const auto& pt = fp.pts[p];
            const auto r = regular_from_samples(cav, m, s.first[pt.ixi], s.d_first[pt.ixi], s.second[pt.ieta],
                                                s.d_second[pt.ieta]);
            double er = 0, ez = 2.0 * r.value, hp = 0;
            if (!pt.singular && pt.rho > 0) {
                const double d_rho = r.d_xi * pt.gxi.rho + r.d_eta * pt.geta.rho;
                const double d_z = r.d_xi * pt.gxi.z + r.d_eta * pt.geta.z;
                er = -pt.rho * d_z;
                ez += pt.rho * d_rho;
                hp = m.k * pt.rho * r.value;
            }
            for (std::size_t f = 0; f < F; ++f) {
                out.e_rho[f * P + p] += ce[f] * er;
                out.e_z[f * P + p] += ce[f] * ez;
                out.b_phi[f * P + p] += cb[f] * hp;
            }
        }
    }
    return out;
}

inline double density_of(const frame_fields& ff, std::size_t idx, const physical_constants& pc, bool electric_only) {
    const double e = pc.epsilon0 * (std::norm(ff.e_rho[idx]) + std::norm(ff.e_z[idx]));
    return electric_only ? e : e + std::norm(ff.b_phi[idx]) / pc.mu0();
}

/// Modes kept after dropping the smallest max-over-frames weights up to `tol` of the total.
inline std::vector<std::size_t> significant_modes(const std::vector<std::vector<cplx>>& phi, std::size_t M,
                                                  double tol, double& dropped) {
    std::vector<double> w(M, 0.0);
    for (const auto& frame : phi)
        for (std::size_t j = 0; j < M; ++j) w[j] = std::max(w[j], std::norm(frame[j]));
    std::vector<std::size_t> order(M);
    for (std::size_t j = 0; j < M; ++j) order[j] = j;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return w[a] < w[b] || (w[a] == w[b] && a < b); });
    double total = 0;
    for (double x : w) total += x;
    dropped = 0;
    std::size_t cut = 0;
    while (cut < M && dropped + w[order[cut]] <= tol * total) dropped += w[order[cut++]];
    std::vector<std::size_t> keep(order.begin() + static_cast<long>(cut), order.end());
    std::sort(keep.begin(), keep.end());
    dropped = total > 0 ? dropped / total : 0.0;
    return keep;
}

} // namespace detail

struct field_options {
    /// Fraction of the photon weight that may be dropped with the weakest modes.
    double mode_tol{1e-8};
    shoot_options shooting{};
};

/// w at a meridional point (rho >= 0, z) for photon amplitudes phi (rotating frame).
[[nodiscard]] inline double energy_density_at(const mode_basis& basis, std::span<const cplx> phi, double rho,
                                              double z, bool electric_only = false, const shoot_options& opt = {}) {
    if (phi.size() != basis.modes.size()) throw domain_error("energy_density_at: missing photon amplitudes");
    if (!inside(basis.cavity, std::abs(rho), z)) throw domain_error("energy_density_at: point outside the cavity");
    detail::field_points fp;
    fp.add(to_curvilinear({std::abs(rho), 0.0, z}, basis.cavity), basis.cavity);
    std::vector<std::size_t> all(basis.modes.size());
    for (std::size_t j = 0; j < all.size(); ++j) all[j] = j;
    const std::vector<std::vector<cplx>> frames{std::vector<cplx>(phi.begin(), phi.end())};
    const auto ff = detail::accumulate_fields(basis.cavity, basis.constants, basis.modes, all, frames, fp, opt);
    return detail::density_of(ff, 0, basis.constants, electric_only);
}

/// Snapshots of the density on a meridional grid, one per photon-amplitude set.
/// Mode profiles are sampled once and contracted against every frame.
[[nodiscard]] inline std::vector<field_snapshot> snapshots(const mode_basis& basis, const kernel_matrix& km,
                                                           std::span<const double> times,
                                                           const std::vector<std::vector<cplx>>& phi,
                                                           const grid_spec& grid, double tau,
                                                           const field_options& opt = {}) {
    grid.validate();
    if (times.size() != phi.size()) throw domain_error("snapshots: one amplitude set per time is required");
    for (const auto& p : phi)
        if (p.size() != basis.modes.size()) throw domain_error("snapshots: missing photon amplitudes");
    const auto& cav = basis.cavity;
    detail::field_points fp;
    std::vector<long> where(grid.n_rho * grid.n_z, -1);
    for (std::size_t iz = 0; iz < grid.n_z; ++iz)
        for (std::size_t ir = 0; ir < grid.n_rho; ++ir) {
            const double rho = std::abs(grid.rho_at(ir)), z = grid.z_at(iz);
            if (!inside(cav, rho, z)) continue;
            where[iz * grid.n_rho + ir] = static_cast<long>(fp.pts.size());
            fp.add(to_curvilinear({rho, 0.0, z}, cav), cav);
        }
    double dropped = 0;
    const auto used = detail::significant_modes(phi, basis.modes.size(), opt.mode_tol, dropped);
    const auto ff = detail::accumulate_fields(cav, basis.constants, basis.modes, used, phi, fp, opt.shooting);
    const double unit = density_unit(km, cav);
    std::vector<field_snapshot> out;
    const std::size_t P = fp.pts.size();
    for (std::size_t f = 0; f < times.size(); ++f) {
        field_snapshot s;
        s.t = times[f];
        s.tau = tau;
        s.unit_scale = unit;
        s.grid = grid;
        s.modes_used = used.size();
        s.dropped_weight = dropped;
        s.density.assign(where.size(), s.mask_sentinel);
        for (std::size_t i = 0; i < where.size(); ++i)
            if (where[i] >= 0)
                s.density[i] =
                    detail::density_of(ff, f * P + static_cast<std::size_t>(where[i]), basis.constants,
                                       grid.electric_only) /
                    unit;
        if (cav.is_ellipsoid()) {
            s.foci = {meridional{0.0, cav.c0()}, meridional{0.0, -cav.c0()}};
        } else {
            s.foci = {meridional{0.0, 0.0}, meridional{0.0, 0.0}};
        }
        out.push_back(std::move(s));
    }
    return out;
}

struct energy_options {
    /// Gauss-Legendre points per panel; panels span one shortest wavelength.
    int points{8};
    double panels_per_wavelength{0.5};
    double mode_tol{1e-8};
    shoot_options shooting{};
};

/// int w dV over the cavity for each amplitude set, by composite
/// Gauss-Legendre quadrature in the separable coordinates.
[[nodiscard]] inline std::vector<double> field_energy(const mode_basis& basis,
                                                      const std::vector<std::vector<cplx>>& phi,
                                                      const energy_options& opt = {}) {
    const auto& cav = basis.cavity;
    const auto& pc = basis.constants;
    double k_max = 0;
    for (const auto& m : basis.modes) k_max = std::max(k_max, m.k);
    if (!(k_max > 0)) throw domain_error("field_energy: empty basis");
    const double lambda = 2.0 * std::numbers::pi / k_max;

    // panel edges along one coordinate with the given physical length per unit coordinate
    auto nodes = [&](double lo, double hi, double length_per_unit, std::vector<double>& x, std::vector<double>& w) {
        const double width = lambda / (opt.panels_per_wavelength * length_per_unit);
        const auto panels = static_cast<std::size_t>(std::ceil((hi - lo) / width));
        const double h = (hi - lo) / static_cast<double>(panels);
        std::vector<double> gx, gw;
        if (opt.points == 8) {
            using g = boost::math::quadrature::gauss<double, 8>;
            for (std::size_t i = 0; i < g::abscissa().size(); ++i) {
                gx.push_back(g::abscissa()[i]);
                gw.push_back(g::weights()[i]);
            }
        } else {
            using g = boost::math::quadrature::gauss<double, 4>;
            for (std::size_t i = 0; i < g::abscissa().size(); ++i) {
                gx.push_back(g::abscissa()[i]);
                gw.push_back(g::weights()[i]);
            }
        }
        for (std::size_t p = 0; p < panels; ++p) {
            const double mid = lo + (static_cast<double>(p) + 0.5) * h;
            for (std::size_t i = 0; i < gx.size(); ++i) {
                // boost stores the non-negative half of the symmetric rule
                x.push_back(mid + 0.5 * h * gx[i]);
                w.push_back(0.5 * h * gw[i]);
                if (gx[i] != 0.0) {
                    x.push_back(mid - 0.5 * h * gx[i]);
                    w.push_back(0.5 * h * gw[i]);
                }
            }
        }
    };

    std::vector<double> xs, wx, es, we;
    if (cav.is_ellipsoid()) {
        const double c0 = cav.c0(), xi0 = cav.xi0();
        nodes(1.0, xi0, c0, xs, wx);
        nodes(-1.0, 1.0, c0 * xi0, es, we);
    } else {
        nodes(0.0, cav.xi_cutoff(), 1.0, xs, wx);
        nodes(0.0, cav.eta0(), 1.0, es, we);
    }
    detail::field_points fp;
    fp.xi = xs;
    fp.eta = es;
    std::vector<double> dv;
    for (std::size_t i = 0; i < xs.size(); ++i)
        for (std::size_t j = 0; j < es.size(); ++j) {
            curvilinear_point q;
            double jac;
            if (cav.is_ellipsoid()) {
                const double c0 = cav.c0();
                q = make_prolate_point(xs[i], es[j]);
                jac = 2.0 * std::numbers::pi * c0 * c0 * c0 * (xs[i] * xs[i] - es[j] * es[j]);
            } else {
                q = make_parabolic_point(xs[i], es[j]);
                jac = 2.0 * std::numbers::pi * 0.25 * (xs[i] + es[j]);
            }
            fp.add(q, cav, i, j);
            dv.push_back(jac * wx[i] * we[j]);
        }
    double dropped = 0;
    const auto used = detail::significant_modes(phi, basis.modes.size(), opt.mode_tol, dropped);
    const auto ff = detail::accumulate_fields(cav, pc, basis.modes, used, phi, fp, opt.shooting);
    std::vector<double> out(phi.size(), 0.0);
    const std::size_t P = fp.pts.size();
    for (std::size_t f = 0; f < phi.size(); ++f)
        for (std::size_t p = 0; p < P; ++p) out[f] += dv[p] * detail::density_of(ff, f * P + p, pc, false);
    return out;
}

} // namespace cavityqed
