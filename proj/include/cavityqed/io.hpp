#pragma once

// Output files and diagnostics. Numbers are written with %.17g so that CSV
// files are exact and byte-stable; wall-clock data only enters JSON sidecars
// and the log.

#include "cavityqed/dynamics.hpp"
#include "cavityqed/errors.hpp"
#include "cavityqed/field.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <string>
#include <vector>

namespace cavityqed {

[[nodiscard]] inline std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// UTC time stamp for sidecars.
[[nodiscard]] inline std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Line-delimited JSON events on standard error.
class event_log {
public:
    explicit event_log(bool enabled = true) : enabled_(enabled), start_(std::chrono::steady_clock::now()) {}

    void operator()(const std::string& event, nlohmann::json fields = nlohmann::json::object()) {
        if (!enabled_) return;
        fields["event"] = event;
        fields["elapsed_s"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        const std::lock_guard lock(mutex_);
        std::cerr << fields.dump() << '\n' << std::flush;
    }

private:
    bool enabled_;
    std::chrono::steady_clock::time_point start_;
    std::mutex mutex_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw config_error("cannot write " + path.string());
    out << text;
    if (!out) throw config_error("write failed for " + path.string());
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

/// Trajectory table, time in units of 1/Gamma_free. Single-atom runs omit the
/// second atom's columns.
[[nodiscard]] inline std::string trajectory_csv(const trajectory& tr) {
    const bool two = tr.atoms == 2;
    std::string s = two ? "t,Re_b1,Im_b1,Re_b2,Im_b2,P1,P2,norm\n" : "t,Re_b1,Im_b1,P1,norm\n";
    for (std::size_t n = 0; n < tr.size(); ++n) {
        s += fmt(tr.t[n] * tr.gamma_free) + "," + fmt(tr.b1[n].real()) + "," + fmt(tr.b1[n].imag());
        if (two) s += "," + fmt(tr.b2[n].real()) + "," + fmt(tr.b2[n].imag());
        s += "," + fmt(tr.P1[n]);
        if (two) s += "," + fmt(tr.P2[n]);
        s += "," + (n < tr.norm.size() ? fmt(tr.norm[n]) : std::string("nan")) + "\n";
    }
    return s;
}

[[nodiscard]] inline nlohmann::json trajectory_sidecar(const trajectory& tr, const std::string& engine) {
    nlohmann::json units{{"t", "1/gamma_free"},
                         {"Re_b1", "1"},
                         {"Im_b1", "1"},
                         {"P1", "1"},
                         {"norm", "1"}};
    if (tr.atoms == 2) {
        units["Re_b2"] = "1";
        units["Im_b2"] = "1";
        units["P2"] = "1";
    }
    return {{"engine", engine},
            {"atoms", tr.atoms},
            {"samples", tr.size()},
            {"gamma_free", tr.gamma_free},
            {"tau", tr.tau},
            {"tau_in_time_unit", tr.tau * tr.gamma_free},
            {"frame", "amplitudes rotating at omega_eg"},
            {"units", units}};
}

/// Snapshot matrix: one header row with the grid metadata, then n_z rows of
/// n_rho values (z ascending, rho from -rho_max to rho_max).
[[nodiscard]] inline std::string snapshot_csv(const field_snapshot& s) {
    const auto& g = s.grid;
    std::string out = "# n_rho=" + std::to_string(g.n_rho) + " n_z=" + std::to_string(g.n_z) + " rho_min=" +
                      fmt(-g.rho_max) + " rho_max=" + fmt(g.rho_max) + " z_min=" + fmt(g.z_min) +
                      " z_max=" + fmt(g.z_max) + " mask_sentinel=" + fmt(s.mask_sentinel) + "\n";
    for (std::size_t iz = 0; iz < g.n_z; ++iz) {
        for (std::size_t ir = 0; ir < g.n_rho; ++ir) {
            if (ir) out += ",";
            out += fmt(s.density[iz * g.n_rho + ir]);
        }
        out += "\n";
    }
    return out;
}

[[nodiscard]] inline nlohmann::json snapshot_sidecar(const field_snapshot& s) {
    const auto& g = s.grid;
    return {{"t", s.t},
            {"tau", s.tau},
            {"t_over_tau", s.t / s.tau},
            {"unit_scale", s.unit_scale},
            {"density_unit", "3*pi*hbar*omega_eg*gamma_free/(80*d^2*c)"},
            {"extents", {{"rho_min", -g.rho_max}, {"rho_max", g.rho_max}, {"z_min", g.z_min}, {"z_max", g.z_max}}},
            {"resolution", {{"n_rho", g.n_rho}, {"n_z", g.n_z}}},
            {"layout", "row-major, rows along z ascending, columns along rho ascending"},
            {"mask_sentinel", s.mask_sentinel},
            {"electric_only", g.electric_only},
            {"foci", {{{"rho", s.foci[0].rho}, {"z", s.foci[0].z}}, {{"rho", s.foci[1].rho}, {"z", s.foci[1].z}}}},
            {"modes_used", s.modes_used},
            {"dropped_weight", s.dropped_weight}};
}

} // namespace cavityqed
