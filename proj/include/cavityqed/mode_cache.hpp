#pragma once

// On-disk table of quantized modes, keyed by a hash of everything that
// determines the basis.

#include "cavityqed/errors.hpp"
#include "cavityqed/modes.hpp"
#include "cavityqed/wkb.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

namespace cavityqed {

inline constexpr int mode_cache_version = 1;
inline constexpr const char* cache_env_var = "CAVITYQED_CACHE";

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string g17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

} // namespace detail

[[nodiscard]] inline std::string basis_key(const cavity_spec& cav, const physical_constants& pc, double omega_min,
                                           double omega_max, provenance origin, const quantize_options& opt) {
    using detail::g17;
    std::string s = "v" + std::to_string(mode_cache_version);
    if (cav.is_parabolic())
        s += ";parabolic;" + g17(cav.as_parabolic().focal_length) + ";" + g17(cav.as_parabolic().xi_cutoff);
    else
        s += ";ellipsoid;" + g17(cav.as_ellipsoid().interfocal_d) + ";" + g17(cav.as_ellipsoid().vertex_gap_f);
    s += ";" + g17(pc.c) + ";" + g17(pc.hbar) + ";" + g17(pc.epsilon0);
    s += ";" + g17(omega_min) + ";" + g17(omega_max) + ";" + to_string(origin);
    s += ";" + g17(opt.channel_cutoff) + ";" + std::to_string(opt.max_modes) + ";" + g17(opt.mismatch_tol);
    s += ";" + g17(opt.shooting.abs_tol) + ";" + g17(opt.shooting.rel_tol) + ";" + g17(opt.shooting.origin_offset) +
         ";" + g17(opt.shooting.far_field_tol);
    return s;
}

[[nodiscard]] inline nlohmann::json to_json(const mode_basis& b, const std::string& key) {
    nlohmann::json modes = nlohmann::json::array();
    for (const auto& m : b.modes)
        modes.push_back({m.omega, m.k, m.channel, m.longitudinal, m.separation, m.normalization, m.norm_integral,
                         m.gz_focus[0], m.gz_focus[1]});
    return {{"format_version", mode_cache_version},
            {"key", key},
            {"provenance", to_string(b.origin)},
            {"omega_min", b.omega_min},
            {"omega_max", b.omega_max},
            {"channels", b.channels},
            {"columns", {"omega", "k", "channel", "longitudinal", "separation", "normalization", "norm_integral",
                         "gz_focus1", "gz_focus2"}},
            {"modes", modes}};
}

class mode_cache {
public:
    explicit mode_cache(std::filesystem::path dir) : dir_(std::move(dir)) {}

    /// Directory from the environment override, else `fallback` (may be empty: no cache).
    [[nodiscard]] static std::optional<mode_cache> resolve(const std::string& fallback) {
        if (const char* env = std::getenv(cache_env_var); env && *env) return mode_cache(env);
        if (fallback.empty()) return std::nullopt;
        return mode_cache(fallback);
    }

    [[nodiscard]] const std::filesystem::path& dir() const { return dir_; }

    [[nodiscard]] std::filesystem::path path_for(const std::string& key) const {
        char hex[17];
        std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(detail::fnv1a(key)));
        return dir_ / (std::string("modes-") + hex + ".json");
    }

    /// Returns the stored basis when present, intact and written for exactly this key.
    [[nodiscard]] std::optional<mode_basis> load(const std::string& key, const cavity_spec& cav,
                                                 const physical_constants& pc) const {
        std::ifstream in(path_for(key));
        if (!in) return std::nullopt;
        const auto j = nlohmann::json::parse(in, nullptr, false);
        if (j.is_discarded() || !j.is_object() || j.value("format_version", -1) != mode_cache_version ||
            j.value("key", std::string{}) != key)
            return std::nullopt;
        try {
            mode_basis b{cav, pc, {}, j.at("omega_min"), j.at("omega_max"),
                         j.at("provenance") == "wkb" ? provenance::wkb : provenance::exact, j.at("channels")};
            for (const auto& r : j.at("modes")) {
                mode m;
                m.omega = r.at(0);
                m.k = r.at(1);
                m.channel = r.at(2);
                m.longitudinal = r.at(3);
                m.separation = r.at(4);
                m.normalization = r.at(5);
                m.norm_integral = r.at(6);
                m.gz_focus = {r.at(7).get<double>(), r.at(8).get<double>()};
                b.modes.push_back(m);
            }
            return b;
        } catch (const nlohmann::json::exception&) {
            return std::nullopt;
        }
    }

    void store(const std::string& key, const mode_basis& b) const {
        std::filesystem::create_directories(dir_);
        const auto target = path_for(key);
        auto tmp = target;
        tmp += ".tmp";
        {
            std::ofstream out(tmp);
            if (!out) throw config_error("mode cache: cannot write " + tmp.string());
            out << to_json(b, key).dump() << '\n';
        }
        std::filesystem::rename(tmp, target);
    }

private:
    std::filesystem::path dir_;
};

/// Quantize through the cache: load when warm, otherwise compute and store.
[[nodiscard]] inline mode_basis cached_basis(const std::optional<mode_cache>& cache, const cavity_spec& cav,
                                             const physical_constants& pc, double omega_min, double omega_max,
                                             provenance origin, const quantize_options& opt = {},
                                             bool* hit = nullptr) {
    const auto key = basis_key(cav, pc, omega_min, omega_max, origin, opt);
    if (hit) *hit = false;
    if (cache) {
        if (auto b = cache->load(key, cav, pc)) {
            if (hit) *hit = true;
            return *b;
        }
    }
    auto b = origin == provenance::exact ? quantize_exact(cav, pc, omega_min, omega_max, opt)
                                         : quantize_wkb(cav, pc, omega_min, omega_max, opt);
    if (cache) cache->store(key, b);
    return b;
}

} // namespace cavityqed
