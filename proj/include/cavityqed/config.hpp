#pragma once

// Run configuration: a JSON document with a schema version, explicit unit
// tags on every physical quantity and no unknown fields.

#include "cavityqed/errors.hpp"
#include "cavityqed/geometry.hpp"
#include "cavityqed/modes.hpp"

#include <json.hpp>

#include <cstddef>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace cavityqed {

inline constexpr int config_schema_version = 1;

/// Unit tags. Values are read in whatever consistent system the constants define.
namespace unit {
inline constexpr const char* length = "m";
inline constexpr const char* angular_frequency = "rad/s";
inline constexpr const char* dipole = "C*m";
inline constexpr const char* speed = "m/s";
inline constexpr const char* action = "J*s";
inline constexpr const char* permittivity = "F/m";
} // namespace unit

struct linear_grid {
    double min{0};
    double max{0};
    std::size_t points{0};

    [[nodiscard]] std::vector<double> values() const {
        std::vector<double> v;
        for (std::size_t i = 0; i < points; ++i)
            v.push_back(points == 1 ? min
                                    : min + (max - min) * static_cast<double>(i) / static_cast<double>(points - 1));
        return v;
    }
};

struct purcell_scan {
    std::variant<std::vector<double>, linear_grid> u_grid{std::vector<double>{}};
    /// Lorentzian width in units of the coupling-weighted mode spacing.
    double epsilon_spacings{10.0};

    [[nodiscard]] std::vector<double> u_values() const {
        if (const auto* g = std::get_if<linear_grid>(&u_grid)) return g->values();
        return std::get<std::vector<double>>(u_grid);
    }
};

struct dynamics_run {
    double t_max_over_tau{3.0};
    std::size_t samples{301};
    int initial_atom{1};
    /// Sets the dipole from Gamma_free tau when the atoms carry none.
    std::optional<double> gamma_free_tau;
};

struct frame_grid {
    std::size_t n_rho{121};
    std::size_t n_z{121};
    bool electric_only{false};
    std::optional<double> rho_max, z_min, z_max;
};

struct field_frames {
    std::vector<double> times_over_tau;
    int initial_atom{1};
    std::optional<double> gamma_free_tau;
    /// Time grid used to propagate up to the last frame, in samples per tau.
    std::size_t samples_per_tau{100};
    frame_grid grid;
};

using experiment = std::variant<purcell_scan, dynamics_run, field_frames>;

struct atom_entry {
    int focus{1};
    std::optional<double> omega_eg;
    std::optional<double> dipole;
};

struct basis_spec {
    provenance origin{provenance::exact};
    /// Window omega_eg +- half_width.
    double half_width{0};
    double channel_cutoff{1e-6};
};

struct run_config {
    int schema_version{config_schema_version};
    cavity_spec cavity;
    std::vector<atom_entry> atoms;
    physical_constants constants;
    basis_spec basis;
    experiment run{purcell_scan{}};
    std::string output_dir;
};

[[nodiscard]] inline const char* experiment_name(const experiment& e) {
    if (std::holds_alternative<purcell_scan>(e)) return "purcell_scan";
    if (std::holds_alternative<dynamics_run>(e)) return "dynamics";
    return "field_frames";
}

namespace detail {

using nlohmann::json;

/// Object view that rejects keys nobody asked for.
class strict_object {
public:
    strict_object(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j.is_object()) throw config_error(where_ + ": expected an object");
    }

    [[nodiscard]] bool has(const std::string& key) const { return j_.contains(key); }

    [[nodiscard]] const json& at(const std::string& key) {
        if (!j_.contains(key)) throw config_error(where_ + ": missing field '" + key + "'");
        seen_.insert(key);
        return j_.at(key);
    }

    [[nodiscard]] double number(const std::string& key) {
        const auto& v = at(key);
        if (!v.is_number()) throw config_error(where_ + "." + key + ": expected a number");
        return v.get<double>();
    }

    [[nodiscard]] std::size_t count(const std::string& key) {
        const auto& v = at(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
            throw config_error(where_ + "." + key + ": expected a non-negative integer");
        return v.get<std::size_t>();
    }

    [[nodiscard]] int integer(const std::string& key) {
        const auto& v = at(key);
        if (!v.is_number_integer()) throw config_error(where_ + "." + key + ": expected an integer");
        return v.get<int>();
    }

    [[nodiscard]] std::string text(const std::string& key) {
        const auto& v = at(key);
        if (!v.is_string()) throw config_error(where_ + "." + key + ": expected a string");
        return v.get<std::string>();
    }

    [[nodiscard]] bool flag(const std::string& key) {
        const auto& v = at(key);
        if (!v.is_boolean()) throw config_error(where_ + "." + key + ": expected true or false");
        return v.get<bool>();
    }

    /// {"value": x, "unit": tag}
    [[nodiscard]] double quantity(const std::string& key, const char* tag) {
        strict_object q(at(key), where_ + "." + key);
        const double v = q.number("value");
        const auto u = q.text("unit");
        if (u != tag) throw config_error(where_ + "." + key + ": unit '" + u + "' where '" + tag + "' is required");
        q.finish();
        return v;
    }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw config_error(where_ + ": unknown field '" + k + "'");
    }

    [[nodiscard]] const std::string& where() const { return where_; }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

inline json quantity(double v, const char* tag) { return {{"value", v}, {"unit", tag}}; }

inline std::vector<double> number_list(const json& j, const std::string& where) {
    if (!j.is_array()) throw config_error(where + ": expected an array of numbers");
    std::vector<double> out;
    for (const auto& x : j) {
        if (!x.is_number()) throw config_error(where + ": expected an array of numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

inline void require_positive(double v, const std::string& what) {
    if (!(v > 0)) throw config_error(what + " must be positive");
}

} // namespace detail

/// Consistency checks that need the whole document.
inline void validate(const run_config& cfg) {
    if (cfg.schema_version != config_schema_version)
        throw config_error("unsupported schema_version " + std::to_string(cfg.schema_version));
    cfg.constants.validate();
    cfg.cavity.validate();
    if (cfg.atoms.empty() || cfg.atoms.size() > 2) throw config_error("one or two atoms are required");
    if (cfg.atoms.size() == 2 && !cfg.cavity.is_ellipsoid()) throw config_error("two atoms need the ellipsoid");
    if (cfg.atoms.size() == 2 && cfg.atoms[0].focus == cfg.atoms[1].focus)
        throw config_error("atoms must occupy distinct foci");
    for (const auto& a : cfg.atoms) {
        if (a.focus != 1 && a.focus != 2) throw config_error("atom focus must be 1 or 2");
        if (cfg.cavity.is_parabolic() && a.focus != 1) throw config_error("the parabola has a single focus");
        if (a.omega_eg) detail::require_positive(*a.omega_eg, "omega_eg");
        if (a.dipole) detail::require_positive(*a.dipole, "dipole");
    }
    if (cfg.atoms.size() == 2 && (cfg.atoms[0].omega_eg != cfg.atoms[1].omega_eg ||
                                  cfg.atoms[0].dipole != cfg.atoms[1].dipole))
        throw config_error("the two atoms must be identical");
    detail::require_positive(cfg.basis.half_width, "basis.half_width");
    if (!(cfg.basis.channel_cutoff >= 0) || !(cfg.basis.channel_cutoff < 1))
        throw config_error("basis.channel_cutoff must lie in [0, 1)");

    auto timed = [&](const std::optional<double>& gt, int initial) {
        for (const auto& a : cfg.atoms)
            if (!a.omega_eg) throw config_error("atoms need omega_eg for time evolution");
        const bool dipoles = cfg.atoms[0].dipole.has_value();
        if (dipoles == gt.has_value())
            throw config_error("give either the atomic dipole or gamma_free_tau, exactly one of them");
        if (gt) detail::require_positive(*gt, "gamma_free_tau");
        if (initial < 1 || initial > static_cast<int>(cfg.atoms.size()))
            throw config_error("initial_atom must name one of the atoms");
        if (*cfg.atoms[0].omega_eg <= cfg.basis.half_width)
            throw config_error("basis.half_width must be below omega_eg");
    };

    if (const auto* p = std::get_if<purcell_scan>(&cfg.run)) {
        if (cfg.atoms.size() != 1) throw config_error("the Purcell scan uses one atom");
        if (cfg.atoms[0].omega_eg) throw config_error("omega_eg is set by the u grid in a Purcell scan");
        if (const auto* g = std::get_if<linear_grid>(&p->u_grid)) {
            if (g->points < 1 || !(g->min > 0) || g->max < g->min) throw config_error("bad u_grid range");
        }
        const auto u = p->u_values();
        if (u.empty()) throw config_error("u_grid is empty");
        for (double x : u) detail::require_positive(x, "u");
        detail::require_positive(p->epsilon_spacings, "epsilon_spacings");
    } else if (const auto* d = std::get_if<dynamics_run>(&cfg.run)) {
        timed(d->gamma_free_tau, d->initial_atom);
        detail::require_positive(d->t_max_over_tau, "t_max_over_tau");
        if (d->samples < 4) throw config_error("dynamics needs at least four samples");
    } else {
        const auto& f = std::get<field_frames>(cfg.run);
        timed(f.gamma_free_tau, f.initial_atom);
        if (f.times_over_tau.empty()) throw config_error("times_over_tau is empty");
        for (double t : f.times_over_tau)
            if (!(t >= 0)) throw config_error("frame times must be non-negative");
        if (f.samples_per_tau < 4) throw config_error("samples_per_tau must be at least 4");
        if (f.grid.n_rho < 2 || f.grid.n_z < 2) throw config_error("the frame grid needs two points per axis");
    }
}

[[nodiscard]] inline run_config parse_config(const nlohmann::json& j) {
    using detail::strict_object;
    strict_object root(j, "config");
    run_config cfg;
    cfg.schema_version = root.integer("schema_version");
    if (cfg.schema_version != config_schema_version)
        throw config_error("unsupported schema_version " + std::to_string(cfg.schema_version));

    {
        strict_object c(root.at("constants"), "constants");
        cfg.constants.c = c.quantity("c", unit::speed);
        cfg.constants.hbar = c.quantity("hbar", unit::action);
        cfg.constants.epsilon0 = c.quantity("epsilon0", unit::permittivity);
        c.finish();
    }
    {
        strict_object c(root.at("cavity"), "cavity");
        const auto shape = c.text("shape");
        if (shape == "parabolic") {
            parabolic p;
            p.focal_length = c.quantity("focal_length", unit::length);
            p.xi_cutoff = c.quantity("xi_cutoff", unit::length);
            cfg.cavity = cavity_spec(p);
        } else if (shape == "prolate_ellipsoid") {
            prolate_ellipsoid e;
            e.interfocal_d = c.quantity("interfocal_d", unit::length);
            e.vertex_gap_f = c.quantity("vertex_gap_f", unit::length);
            cfg.cavity = cavity_spec(e);
        } else {
            throw config_error("cavity.shape must be 'parabolic' or 'prolate_ellipsoid'");
        }
        c.finish();
    }
    {
        const auto& arr = root.at("atoms");
        if (!arr.is_array()) throw config_error("atoms: expected an array");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            strict_object a(arr[i], "atoms[" + std::to_string(i) + "]");
            atom_entry e;
            e.focus = a.integer("focus");
            if (a.has("omega_eg")) e.omega_eg = a.quantity("omega_eg", unit::angular_frequency);
            if (a.has("dipole")) e.dipole = a.quantity("dipole", unit::dipole);
            a.finish();
            cfg.atoms.push_back(e);
        }
    }
    {
        strict_object b(root.at("basis"), "basis");
        const auto origin = b.text("provenance");
        if (origin == "exact")
            cfg.basis.origin = provenance::exact;
        else if (origin == "wkb")
            cfg.basis.origin = provenance::wkb;
        else
            throw config_error("basis.provenance must be 'exact' or 'wkb'");
        cfg.basis.half_width = b.quantity("half_width", unit::angular_frequency);
        if (b.has("channel_cutoff")) cfg.basis.channel_cutoff = b.number("channel_cutoff");
        b.finish();
    }
    {
        strict_object e(root.at("experiment"), "experiment");
        const auto kind = e.text("kind");
        if (kind == "purcell_scan") {
            purcell_scan p;
            const auto& g = e.at("u_grid");
            if (g.is_array()) {
                p.u_grid = detail::number_list(g, "experiment.u_grid");
            } else {
                strict_object r(g, "experiment.u_grid");
                linear_grid lg;
                lg.min = r.number("min");
                lg.max = r.number("max");
                lg.points = r.count("points");
                r.finish();
                p.u_grid = lg;
            }
            if (e.has("epsilon_spacings")) p.epsilon_spacings = e.number("epsilon_spacings");
            cfg.run = p;
        } else if (kind == "dynamics") {
            dynamics_run d;
            d.t_max_over_tau = e.number("t_max_over_tau");
            d.samples = e.count("samples");
            d.initial_atom = e.integer("initial_atom");
            if (e.has("gamma_free_tau")) d.gamma_free_tau = e.number("gamma_free_tau");
            cfg.run = d;
        } else if (kind == "field_frames") {
            field_frames f;
            f.times_over_tau = detail::number_list(e.at("times_over_tau"), "experiment.times_over_tau");
            f.initial_atom = e.integer("initial_atom");
            if (e.has("gamma_free_tau")) f.gamma_free_tau = e.number("gamma_free_tau");
            if (e.has("samples_per_tau")) f.samples_per_tau = e.count("samples_per_tau");
            strict_object g(e.at("grid"), "experiment.grid");
            f.grid.n_rho = g.count("n_rho");
            f.grid.n_z = g.count("n_z");
            if (g.has("electric_only")) f.grid.electric_only = g.flag("electric_only");
            if (g.has("rho_max")) f.grid.rho_max = g.quantity("rho_max", unit::length);
            if (g.has("z_min")) f.grid.z_min = g.quantity("z_min", unit::length);
            if (g.has("z_max")) f.grid.z_max = g.quantity("z_max", unit::length);
            g.finish();
            cfg.run = f;
        } else {
            throw config_error("experiment.kind must be purcell_scan, dynamics or field_frames");
        }
        e.finish();
    }
    if (root.has("output_dir")) cfg.output_dir = root.text("output_dir");
    root.finish();
    validate(cfg);
    return cfg;
}

[[nodiscard]] inline nlohmann::json to_json(const run_config& cfg) {
    using detail::quantity;
    nlohmann::json j;
    j["schema_version"] = cfg.schema_version;
    j["constants"] = {{"c", quantity(cfg.constants.c, unit::speed)},
                      {"hbar", quantity(cfg.constants.hbar, unit::action)},
                      {"epsilon0", quantity(cfg.constants.epsilon0, unit::permittivity)}};
    if (cfg.cavity.is_parabolic())
        j["cavity"] = {{"shape", "parabolic"},
                       {"focal_length", quantity(cfg.cavity.as_parabolic().focal_length, unit::length)},
                       {"xi_cutoff", quantity(cfg.cavity.as_parabolic().xi_cutoff, unit::length)}};
    else
        j["cavity"] = {{"shape", "prolate_ellipsoid"},
                       {"interfocal_d", quantity(cfg.cavity.as_ellipsoid().interfocal_d, unit::length)},
                       {"vertex_gap_f", quantity(cfg.cavity.as_ellipsoid().vertex_gap_f, unit::length)}};
    j["atoms"] = nlohmann::json::array();
    for (const auto& a : cfg.atoms) {
        nlohmann::json e{{"focus", a.focus}};
        if (a.omega_eg) e["omega_eg"] = quantity(*a.omega_eg, unit::angular_frequency);
        if (a.dipole) e["dipole"] = quantity(*a.dipole, unit::dipole);
        j["atoms"].push_back(e);
    }
    j["basis"] = {{"provenance", to_string(cfg.basis.origin)},
                  {"half_width", quantity(cfg.basis.half_width, unit::angular_frequency)},
                  {"channel_cutoff", cfg.basis.channel_cutoff}};
    nlohmann::json e{{"kind", experiment_name(cfg.run)}};
    if (const auto* p = std::get_if<purcell_scan>(&cfg.run)) {
        if (const auto* g = std::get_if<linear_grid>(&p->u_grid))
            e["u_grid"] = {{"min", g->min}, {"max", g->max}, {"points", g->points}};
        else
            e["u_grid"] = std::get<std::vector<double>>(p->u_grid);
        e["epsilon_spacings"] = p->epsilon_spacings;
    } else if (const auto* d = std::get_if<dynamics_run>(&cfg.run)) {
        e["t_max_over_tau"] = d->t_max_over_tau;
        e["samples"] = d->samples;
        e["initial_atom"] = d->initial_atom;
        if (d->gamma_free_tau) e["gamma_free_tau"] = *d->gamma_free_tau;
    } else {
        const auto& f = std::get<field_frames>(cfg.run);
        e["times_over_tau"] = f.times_over_tau;
        e["initial_atom"] = f.initial_atom;
        if (f.gamma_free_tau) e["gamma_free_tau"] = *f.gamma_free_tau;
        e["samples_per_tau"] = f.samples_per_tau;
        nlohmann::json g{{"n_rho", f.grid.n_rho}, {"n_z", f.grid.n_z}, {"electric_only", f.grid.electric_only}};
        if (f.grid.rho_max) g["rho_max"] = quantity(*f.grid.rho_max, unit::length);
        if (f.grid.z_min) g["z_min"] = quantity(*f.grid.z_min, unit::length);
        if (f.grid.z_max) g["z_max"] = quantity(*f.grid.z_max, unit::length);
        e["grid"] = g;
    }
    j["experiment"] = e;
    if (!cfg.output_dir.empty()) j["output_dir"] = cfg.output_dir;
    return j;
}

[[nodiscard]] inline run_config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file " + path);
    const auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw config_error("config file " + path + " is not valid JSON");
    return parse_config(j);
}

} // namespace cavityqed
