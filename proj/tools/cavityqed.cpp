#include "cavityqed/pipelines.hpp"

#include <CLI11.hpp>

#include <exception>
#include <iostream>
#include <string>

using namespace cavityqed;

namespace {

int fail(event_log& log, const std::string& kind, const std::string& what, int code) {
    log("error", {{"kind", kind}, {"message", what}, {"exit_code", code}});
    return code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spontaneous emission and excitation exchange in focusing cavities"};
    app.require_subcommand(1);
    std::string config_path, out_dir, cache_dir;
    unsigned threads = 1;
    bool quiet = false;
    for (auto [name, help] : {std::pair{"purcell", "Purcell factor scan over 2 pi f / lambda_eg"},
                              std::pair{"dynamics", "Excitation probabilities of one or two atoms"},
                              std::pair{"frames", "Energy-density snapshots of the emitted photon"}}) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "Output directory (overrides output_dir in the config)");
        sub->add_option("--threads", threads, "Worker threads")->check(CLI::Range(1u, 1024u));
        sub->add_option("--cache", cache_dir, std::string("Mode cache directory (") + cache_env_var + " overrides)");
        sub->add_flag("--quiet", quiet, "Suppress the event log on standard error");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : exit_code(error_kind::config);
    }

    event_log log(!quiet);
    const std::string command = app.get_subcommands().front()->get_name();
    try {
        const auto cfg = load_config(config_path);
        const std::string expected = command == "purcell" ? "purcell_scan"
                                     : command == "dynamics" ? "dynamics"
                                                             : "field_frames";
        if (experiment_name(cfg.run) != expected)
            throw config_error("config describes a " + std::string(experiment_name(cfg.run)) + " run, not " +
                               expected);
        run_context ctx;
        ctx.out_dir = !out_dir.empty() ? out_dir : cfg.output_dir;
        if (ctx.out_dir.empty()) throw config_error("no output directory: pass --out or set output_dir");
        ctx.cache = mode_cache::resolve(cache_dir);
        ctx.threads = threads;
        ctx.log = &log;
        log("start", {{"command", command},
                      {"config", config_path},
                      {"out", ctx.out_dir.string()},
                      {"cache", ctx.cache ? ctx.cache->dir().string() : std::string()},
                      {"threads", threads}});
        if (command == "purcell")
            (void)run_purcell_scan(cfg, ctx);
        else if (command == "dynamics")
            (void)run_dynamics(cfg, ctx);
        else
            (void)run_field_frames(cfg, ctx);
        log("done");
        return 0;
    } catch (const error& e) {
        const char* kinds[] = {"config", "domain", "convergence", "invariant"};
        return fail(log, kinds[static_cast<int>(e.kind())], e.what(), exit_code(e.kind()));
    } catch (const std::filesystem::filesystem_error& e) {
        return fail(log, "config", e.what(), exit_code(error_kind::config));
    } catch (const std::exception& e) {
        return fail(log, "invariant", e.what(), exit_code(error_kind::invariant));
    }
}
