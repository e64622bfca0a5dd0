// sparseloc <kind> --config FILE [--seed N] [--out DIR] [--threads N]
// sparseloc verify [--out DIR] [--threads N] [--only NAME]...
// sparseloc preset NAME
//
// Exit codes: 0 pass, 1 verdict failure, 2 config error, 3 numerical error.

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <omp.h>

#include <CLI11.hpp>

#include "sparseloc/errors.hpp"
#include "sparseloc/experiment.hpp"
#include "sparseloc/presets.hpp"

namespace {

using namespace sparseloc;

constexpr int kPass = 0;
constexpr int kVerdictFailure = 1;
constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

void set_threads(int cli_threads) {
    int n = cli_threads;
    if (n <= 0)
        if (const char* env = std::getenv("SPARSELOC_THREADS"))
            n = std::atoi(env);
    if (n > 0)
        omp_set_num_threads(n);
}

void print_manifest(const RunManifest& m) {
    for (const auto& v : m.verdicts)
        std::cout << (v.pass ? "PASS " : "FAIL ") << v.name << ": " << v.detail << "\n";
    std::cout << m.status << " " << m.kind << " -> " << m.directory.string() << " (" << m.wall_seconds << " s)\n";
}

// Runs one validated config; maps the outcome onto an exit code.
int run_one(const ValidationReport& rep, const std::string& out_override) {
    const auto& cfg = *rep.config;
    for (const auto& [name, value] : rep.derived)
        std::cerr << "derived " << name << " = " << value << "\n";
    const std::string out = out_override.empty() ? cfg.output : out_override;
    try {
        const auto m = run_experiment(cfg, out);
        print_manifest(m);
        return m.pass() ? kPass : kVerdictFailure;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kNumericalError;
    }
}

int report_violations(const ValidationReport& rep) {
    std::cerr << "config rejected (" << rep.violations.size() << " violation"
              << (rep.violations.size() == 1 ? "" : "s") << "):\n";
    for (const auto& v : rep.violations)
        std::cerr << "  " << v << "\n";
    return kConfigError;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Seeded experiments on random Schroedinger operators with sparse disorder"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    long long seed = -1;
    int threads = 0;
    bool validate_only = false;

    for (const auto kind : all_kinds()) {
        auto* sub = app.add_subcommand(to_string(kind), "run a " + to_string(kind) + " experiment");
        sub->add_option("--config", config_path, "JSON experiment config")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "replace every seed in the config")->check(CLI::NonNegativeNumber);
        sub->add_option("--out", out_dir, "output directory (default: the config's output)");
        sub->add_option("--threads", threads, "worker threads (default: $SPARSELOC_THREADS)");
        sub->add_flag("--validate-only", validate_only, "check the config and print derived quantities");
    }
    auto* verify = app.add_subcommand("verify", "run every acceptance preset");
    std::vector<std::string> only;
    verify->add_option("--out", out_dir, "root directory for preset runs (default runs/verify)");
    verify->add_option("--threads", threads, "worker threads (default: $SPARSELOC_THREADS)");
    verify->add_option("--only", only, "restrict to the named presets");
    auto* show = app.add_subcommand("preset", "print a preset config");
    std::string preset_name;
    show->add_option("name", preset_name, "preset name")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kPass : kConfigError;
    }
    set_threads(threads);

    if (show->parsed()) {
        try {
            std::cout << preset(preset_name).config << "\n";
            return kPass;
        } catch (const std::exception& e) {
            std::cerr << e.what() << "\n";
            return kConfigError;
        }
    }

    if (verify->parsed()) {
        const std::string root = out_dir.empty() ? "runs/verify" : out_dir;
        int worst = kPass;
        for (const auto& p : presets()) {
            if (!only.empty() && std::find(only.begin(), only.end(), p.name) == only.end())
                continue;
            std::cout << "== " << p.name << "\n";
            const auto rep = validate_config(p.config);
            const int code = rep.ok() ? run_one(rep, root + "/" + p.name) : report_violations(rep);
            worst = std::max(worst, code);
        }
        return worst;
    }

    const auto* sub = app.get_subcommands().front();
    std::ifstream in(config_path, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    const std::optional<std::uint64_t> seed_override =
        seed >= 0 ? std::optional<std::uint64_t>(static_cast<std::uint64_t>(seed)) : std::nullopt;
    const auto rep = validate_config(buf.str(), seed_override);
    if (!rep.ok())
        return report_violations(rep);
    if (to_string(rep.config->kind) != sub->get_name()) {
        std::cerr << "config kind " << to_string(rep.config->kind) << " does not match subcommand "
                  << sub->get_name() << "\n";
        return kConfigError;
    }
    if (validate_only) {
        for (const auto& [name, value] : rep.derived)
            std::cout << name << " = " << value << "\n";
        std::cout << "config ok\n";
        return kPass;
    }
    return run_one(rep, out_dir);
}
