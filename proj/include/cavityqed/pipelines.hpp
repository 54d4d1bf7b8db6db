#pragma once

// The three experiments behind the command line tool. Independent work items
// run on a small worker pool; results are collected by index and written by
// the calling thread, so outputs do not depend on the thread count.

#include "cavityqed/config.hpp"
#include "cavityqed/dynamics.hpp"
#include "cavityqed/field.hpp"
#include "cavityqed/io.hpp"
#include "cavityqed/kernel.hpp"
#include "cavityqed/mode_cache.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace cavityqed {

struct run_context {
    std::filesystem::path out_dir;
    std::optional<mode_cache> cache;
    unsigned threads{1};
    event_log* log{nullptr};

    void event(const std::string& name, nlohmann::json fields = nlohmann::json::object()) const {
        if (log) (*log)(name, std::move(fields));
    }
};

/// Runs job(i) for i < n on up to `threads` workers. The exception of the
/// lowest failing index is rethrown after all workers finish.
inline void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& job) {
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                job(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const unsigned w = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
    std::vector<std::thread> pool;
    for (unsigned k = 1; k < w; ++k) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

namespace detail {

inline quantize_options quantize_for(const run_config& cfg) {
    quantize_options q;
    q.channel_cutoff = cfg.basis.channel_cutoff;
    return q;
}

/// Length that turns the scan variable u into omega_eg = u c / length.
inline double scan_length(const cavity_spec& cav) {
    return cav.is_parabolic() ? cav.as_parabolic().focal_length : cav.as_ellipsoid().vertex_gap_f;
}

/// Dipole that gives the requested Gamma_free tau.
inline double dipole_for(double gamma_tau, double omega_eg, double tau, const physical_constants& pc) {
    const double gamma = gamma_tau / tau;
    return std::sqrt(gamma * 3.0 * std::numbers::pi * pc.epsilon0 * pc.hbar * pc.c * pc.c * pc.c /
                     (omega_eg * omega_eg * omega_eg));
}

struct timed_setup {
    mode_basis basis;
    kernel_matrix km;
    double tau;
    double horizon;
};

inline timed_setup prepare_timed(const run_config& cfg, const run_context& ctx, const std::optional<double>& gamma_tau) {
    const auto& pc = cfg.constants;
    const double w = *cfg.atoms[0].omega_eg;
    const double tau = travel_time(cfg.cavity, pc);
    const double D = gamma_tau ? dipole_for(*gamma_tau, w, tau, pc) : *cfg.atoms[0].dipole;
    std::vector<atom_spec> atoms;
    for (const auto& a : cfg.atoms) atoms.push_back({a.focus, w, D});
    ctx.event("quantize", {{"omega_min", w - cfg.basis.half_width}, {"omega_max", w + cfg.basis.half_width}});
    bool hit = false;
    auto basis = cached_basis(ctx.cache, cfg.cavity, pc, w - cfg.basis.half_width, w + cfg.basis.half_width,
                              cfg.basis.origin, quantize_for(cfg), &hit);
    ctx.event("basis", {{"modes", basis.modes.size()}, {"channels", basis.channels}, {"cache_hit", hit}});
    kernel_matrix km(basis, atoms);
    const double horizon = validated_horizon(km);
    return {std::move(basis), std::move(km), tau, horizon};
}

inline void check_horizon(double t_max, const timed_setup& s) {
    if (t_max > s.horizon)
        throw config_error("horizon exceeds the validated range: t_max = " + fmt(t_max / s.tau) +
                           " tau but the basis supports " + fmt(s.horizon / s.tau) +
                           " tau; widen or densify the basis");
}

inline nlohmann::json cavity_summary(const cavity_spec& cav) {
    if (cav.is_parabolic())
        return {{"shape", "parabolic"},
                {"focal_length", cav.as_parabolic().focal_length},
                {"xi_cutoff", cav.as_parabolic().xi_cutoff}};
    return {{"shape", "prolate_ellipsoid"},
            {"interfocal_d", cav.as_ellipsoid().interfocal_d},
            {"vertex_gap_f", cav.as_ellipsoid().vertex_gap_f},
            {"f_over_d", cav.as_ellipsoid().vertex_gap_f / cav.as_ellipsoid().interfocal_d}};
}

} // namespace detail

// ---------------------------------------------------------------------------
// Purcell scan.

struct scan_row {
    double u{0};
    double ratio_semiclassical{0};
    double ratio_exact{std::numeric_limits<double>::quiet_NaN()};
    double epsilon_used{std::numeric_limits<double>::quiet_NaN()};
    bool converged{false};
    std::size_t modes{0};
    double epsilon_change{-1}, window_change{-1};
    std::string failure;
};

[[nodiscard]] inline std::string scan_csv(const std::vector<scan_row>& rows) {
    std::string s = "u,ratio_semiclassical,ratio_exact,epsilon_used,converged\n";
    for (const auto& r : rows)
        s += fmt(r.u) + "," + fmt(r.ratio_semiclassical) + "," + fmt(r.ratio_exact) + "," + fmt(r.epsilon_used) +
             "," + (r.converged ? "1" : "0") + "\n";
    return s;
}

/// Gamma / Gamma_free from the pole formula on the quantized basis and from
/// the semiclassical series, per u = omega_eg L / c (L the focal length of the
/// parabola or the vertex gap of the ellipsoid).
inline std::vector<scan_row> run_purcell_scan(const run_config& cfg, const run_context& ctx) {
    const auto& scan = std::get<purcell_scan>(cfg.run);
    const auto u = scan.u_values();
    const auto& pc = cfg.constants;
    const double L = detail::scan_length(cfg.cavity);
    const double W = cfg.basis.half_width;
    const double D = cfg.atoms[0].dipole.value_or(1e-3);
    for (double x : u)
        if (x * pc.c / L <= W) throw config_error("u = " + fmt(x) + " puts the basis window below zero frequency");

    std::vector<scan_row> rows(u.size());
    ctx.event("purcell_scan", {{"points", u.size()}, {"threads", ctx.threads}});
    parallel_for(u.size(), ctx.threads, [&](std::size_t i) {
        scan_row r;
        r.u = u[i];
        r.ratio_semiclassical = purcell_parabolic_semiclassical(u[i]).ratio;
        const double w = u[i] * pc.c / L;
        try {
            const auto basis = cached_basis(ctx.cache, cfg.cavity, pc, w - W, w + W, cfg.basis.origin,
                                            detail::quantize_for(cfg));
            const kernel_matrix km(basis, {atom_spec{cfg.atoms[0].focus, w, D}});
            const double eps = scan.epsilon_spacings * effective_spacing(km, 0, w, 0.5 * W);
            const auto c = purcell_pole_certified(km, 0, eps, W);
            r.modes = basis.modes.size();
            r.ratio_exact = c.rate.gamma / km.gamma_free();
            r.epsilon_used = eps;
            r.converged = c.converged;
            r.epsilon_change = c.epsilon_change;
            r.window_change = c.window_change;
        } catch (const convergence_error& e) {
            r.failure = e.what();
        }
        ctx.event("scan_point", {{"u", r.u},
                                 {"ratio_exact", r.ratio_exact},
                                 {"ratio_semiclassical", r.ratio_semiclassical},
                                 {"converged", r.converged},
                                 {"modes", r.modes}});
        rows[i] = std::move(r);
    });

    write_text(ctx.out_dir / "purcell_scan.csv", scan_csv(rows));
    nlohmann::json points = nlohmann::json::array();
    for (const auto& r : rows)
        points.push_back({{"u", r.u},
                          {"modes", r.modes},
                          {"epsilon_change", r.epsilon_change},
                          {"window_change", r.window_change},
                          {"failure", r.failure}});
    write_json(ctx.out_dir / "purcell_scan.json",
               {{"kind", "purcell_scan"},
                {"generated_at", utc_now()},
                {"cavity", detail::cavity_summary(cfg.cavity)},
                {"scan_length", L},
                {"reference_ratio", 1.0},
                {"units",
                 {{"u", "2*pi*L/lambda_eg, L = focal length (parabola) or vertex gap (ellipsoid)"},
                  {"ratio_semiclassical", "gamma/gamma_free"},
                  {"ratio_exact", "gamma/gamma_free"},
                  {"epsilon_used", "rad/s"},
                  {"converged", "bool"}}},
                {"points", points},
                {"config", to_json(cfg)}});
    return rows;
}

// ---------------------------------------------------------------------------
// Dynamics.

struct dynamics_report {
    double tau{0};
    double gamma_free{0};
    double horizon{0};
    double max_norm_drift{0};
    double engines_agreement{0};
    double pole_ratio{0};
    std::size_t modes{0};
    trajectory exact, laplace;
};

/// Largest deviation of each amplitude between two runs relative to that amplitude's maximum.
[[nodiscard]] inline double engines_agreement(const trajectory& a, const trajectory& b) {
    double worst = 0;
    auto compare = [&](const std::vector<cplx>& x, const std::vector<cplx>& y) {
        double diff = 0, peak = 0;
        for (std::size_t n = 0; n < x.size(); ++n) {
            diff = std::max(diff, std::abs(x[n] - y[n]));
            peak = std::max(peak, std::abs(x[n]));
        }
        if (peak > 0) worst = std::max(worst, diff / peak);
    };
    compare(a.b1, b.b1);
    if (a.atoms == 2) compare(a.b2, b.b2);
    return worst;
}

inline dynamics_report run_dynamics(const run_config& cfg, const run_context& ctx) {
    const auto& d = std::get<dynamics_run>(cfg.run);
    const auto s = detail::prepare_timed(cfg, ctx, d.gamma_free_tau);
    const double t_max = d.t_max_over_tau * s.tau;
    detail::check_horizon(t_max, s);
    const double dt = t_max / static_cast<double>(d.samples - 1);
    const auto excited = static_cast<std::size_t>(d.initial_atom - 1);

    dynamics_report rep;
    rep.tau = s.tau;
    rep.gamma_free = s.km.gamma_free();
    rep.horizon = s.horizon;
    rep.modes = s.km.modes();
    rep.pole_ratio = purcell_pole(s.km, excited, 10.0 * effective_spacing(s.km, excited, s.km.omega_eg(),
                                                                          0.5 * cfg.basis.half_width))
                         .gamma /
                     s.km.gamma_free();
    ctx.event("propagate", {{"samples", d.samples}, {"t_max_over_tau", d.t_max_over_tau}});
    parallel_for(2, ctx.threads, [&](std::size_t i) {
        if (i == 0) {
            rep.exact = evolve_exact(s.km, excited, dt, d.samples);
        } else {
            rep.laplace = evolve_laplace(s.km, excited, dt, d.samples);
            (void)reconstruct_photons(s.km, rep.laplace, {}, true);
        }
    });
    for (auto* tr : {&rep.exact, &rep.laplace}) tr->tau = s.tau;
    for (double n : rep.exact.norm) rep.max_norm_drift = std::max(rep.max_norm_drift, std::abs(n - 1.0));
    rep.engines_agreement = engines_agreement(rep.exact, rep.laplace);
    ctx.event("engines", {{"max_norm_drift", rep.max_norm_drift}, {"engines_agreement", rep.engines_agreement}});

    write_text(ctx.out_dir / "trajectory_exact.csv", trajectory_csv(rep.exact));
    write_text(ctx.out_dir / "trajectory_laplace.csv", trajectory_csv(rep.laplace));
    auto side = [&](const trajectory& tr, const std::string& engine) {
        auto j = trajectory_sidecar(tr, engine);
        j["generated_at"] = utc_now();
        return j;
    };
    write_json(ctx.out_dir / "trajectory_exact.json", side(rep.exact, "runge_kutta"));
    write_json(ctx.out_dir / "trajectory_laplace.json", side(rep.laplace, "laplace_bromwich"));
    write_json(ctx.out_dir / "dynamics_report.json",
               {{"tau", rep.tau},
                {"gamma_free", rep.gamma_free},
                {"gamma_free_tau", rep.gamma_free * rep.tau},
                {"max_norm_drift", rep.max_norm_drift},
                {"engines_agreement", rep.engines_agreement},
                {"validated_horizon", rep.horizon},
                {"validated_horizon_over_tau", rep.horizon / rep.tau},
                {"purcell_pole_ratio", rep.pole_ratio},
                {"modes", rep.modes},
                {"cavity", detail::cavity_summary(cfg.cavity)},
                {"units", {{"tau", "s"}, {"gamma_free", "1/s"}, {"validated_horizon", "s"}}},
                {"generated_at", utc_now()},
                {"config", to_json(cfg)}});
    return rep;
}

// ---------------------------------------------------------------------------
// Field frames.

struct frame_energy {
    double t{0};
    double field{0};
    double atoms{0};
    /// 2 hbar Re sum kappa conj(b) phi; small when Gamma_free << omega_eg.
    double interaction{0};
    /// |field + atoms - hbar omega_eg| / hbar omega_eg
    double relative_error{0};
    /// Same balance including the interaction energy.
    double hamiltonian_error{0};
};

struct frames_report {
    double tau{0};
    std::vector<field_snapshot> frames;
    std::vector<frame_energy> energy;
};

inline grid_spec frame_grid_for(const cavity_spec& cav, const frame_grid& g) {
    auto grid = default_grid(cav, g.n_rho, g.n_z);
    if (g.rho_max) grid.rho_max = *g.rho_max;
    if (g.z_min) grid.z_min = *g.z_min;
    if (g.z_max) grid.z_max = *g.z_max;
    grid.electric_only = g.electric_only;
    grid.validate();
    return grid;
}

inline frames_report run_field_frames(const run_config& cfg, const run_context& ctx) {
    const auto& f = std::get<field_frames>(cfg.run);
    const auto s = detail::prepare_timed(cfg, ctx, f.gamma_free_tau);
    const double t_last = *std::max_element(f.times_over_tau.begin(), f.times_over_tau.end()) * s.tau;
    detail::check_horizon(t_last, s);
    const auto grid = frame_grid_for(cfg.cavity, f.grid);
    const double dt = s.tau / static_cast<double>(f.samples_per_tau);
    std::vector<std::size_t> idx;
    for (double x : f.times_over_tau)
        idx.push_back(static_cast<std::size_t>(std::llround(x * static_cast<double>(f.samples_per_tau))));
    const std::size_t nt = std::max<std::size_t>(2, *std::max_element(idx.begin(), idx.end()) + 1);

    ctx.event("propagate", {{"samples", nt}, {"frames", idx.size()}});
    exact_options eo;
    eo.photon_samples = idx;
    auto tr = evolve_exact(s.km, static_cast<std::size_t>(f.initial_atom - 1), dt, nt, eo);
    std::vector<double> times;
    for (auto n : idx) times.push_back(static_cast<double>(n) * dt);

    frames_report rep;
    rep.tau = s.tau;
    std::vector<double> energy;
    ctx.event("fields", {{"points", grid.n_rho * grid.n_z}});
    parallel_for(2, ctx.threads, [&](std::size_t i) {
        if (i == 0)
            rep.frames = snapshots(s.basis, s.km, times, tr.photons, grid, s.tau);
        else
            energy = field_energy(s.basis, tr.photons);
    });
    const auto& pc = cfg.constants;
    const double quantum = pc.hbar * s.km.omega_eg();
    for (std::size_t k = 0; k < idx.size(); ++k) {
        frame_energy e;
        e.t = times[k];
        e.field = energy[k];
        e.atoms = quantum * (tr.P1[idx[k]] + tr.P2[idx[k]]);
        const auto& phi = tr.photons[k];
        const std::array<cplx, 2> b{tr.b1[idx[k]], tr.b2[idx[k]]};
        for (std::size_t a = 0; a < s.km.atoms(); ++a) {
            const auto kap = s.km.kappa(a);
            cplx sum = 0;
            for (std::size_t j = 0; j < phi.size(); ++j) sum += kap[j] * phi[j];
            e.interaction += 2.0 * pc.hbar * (std::conj(b[a]) * sum).real();
        }
        e.relative_error = std::abs(e.field + e.atoms - quantum) / quantum;
        e.hamiltonian_error = std::abs(e.field + e.atoms + e.interaction - quantum) / quantum;
        rep.energy.push_back(e);
    }
    ctx.event("energy", {{"worst_relative_error", std::max_element(rep.energy.begin(), rep.energy.end(),
                                                                   [](const auto& a, const auto& b) {
                                                                       return a.relative_error < b.relative_error;
                                                                   })->relative_error}});

    nlohmann::json summary = nlohmann::json::array();
    for (std::size_t k = 0; k < rep.frames.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%02zu", k);
        write_text(ctx.out_dir / (std::string(name) + ".csv"), snapshot_csv(rep.frames[k]));
        auto side = snapshot_sidecar(rep.frames[k]);
        side["generated_at"] = utc_now();
        side["field_energy_over_hbar_omega"] = rep.energy[k].field / quantum;
        side["atomic_energy_over_hbar_omega"] = rep.energy[k].atoms / quantum;
        side["interaction_energy_over_hbar_omega"] = rep.energy[k].interaction / quantum;
        write_json(ctx.out_dir / (std::string(name) + ".json"), side);
        summary.push_back({{"file", std::string(name) + ".csv"},
                           {"t_over_tau", times[k] / s.tau},
                           {"field_energy_over_hbar_omega", rep.energy[k].field / quantum},
                           {"atomic_energy_over_hbar_omega", rep.energy[k].atoms / quantum},
                           {"total_over_hbar_omega", (rep.energy[k].field + rep.energy[k].atoms) / quantum},
                           {"interaction_energy_over_hbar_omega", rep.energy[k].interaction / quantum},
                           {"relative_error", rep.energy[k].relative_error},
                           {"hamiltonian_error", rep.energy[k].hamiltonian_error}});
    }
    write_json(ctx.out_dir / "frames_report.json",
               {{"tau", s.tau},
                {"gamma_free", s.km.gamma_free()},
                {"validated_horizon", s.horizon},
                {"modes", s.km.modes()},
                {"frames", summary},
                {"cavity", detail::cavity_summary(cfg.cavity)},
                {"generated_at", utc_now()},
                {"config", to_json(cfg)}});
    return rep;
}

} // namespace cavityqed
