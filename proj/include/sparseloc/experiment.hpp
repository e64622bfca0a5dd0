#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sparseloc/disorder.hpp"
#include "sparseloc/dynamics.hpp"
#include "sparseloc/lattice.hpp"
#include "sparseloc/operators.hpp"
#include "sparseloc/resolvent.hpp"

namespace sparseloc {

inline constexpr const char* kArtifactVersion = "1.0.0";

enum class ExperimentKind {
    norms,
    kernel,
    propagator,
    decay_check,
    sparseness,
    cook,
    moments,
    decay_fit,
    simon_wolff,
    thresholds,
    edge_scan,
    theorem2_cube
};

std::string to_string(ExperimentKind k);
std::optional<ExperimentKind> parse_kind(std::string_view name);
const std::vector<ExperimentKind>& all_kinds();

enum class SupportType { full, empty, sparse, explicit_list };

struct SupportSpec {
    SupportType type = SupportType::full;
    double alpha = 0.0;  // sparse, and explicit when a cap is requested
    bool check_cap = false;
    SparseGenerator generator = SparseGenerator::deterministic_powers;
    std::uint64_t seed = 0;
    std::vector<Site> sites;
};

struct TimeDecaySpec {
    std::vector<double> t;
    DecayMode mode = DecayMode::max_over_offsets;
    int offset = 0;
};

struct EdgeContrast {
    double margin = 0.5;
    double factor = 10.0;
};

/// Typed parameters; which ones are meaningful depends on the kind.
struct ExperimentParams {
    int nu = 1;
    SymbolSpec symbol;
    std::vector<double> s_grid;
    double s = 0.5;
    std::optional<Cube> volume;
    SupportSpec support;
    std::optional<DisorderModel> disorder;
    std::vector<double> energies;
    double epsilon = 1e-3;
    std::vector<double> epsilon_ladder;
    int realizations = 2;
    std::optional<Site> source;
    std::optional<double> kappa_hat;
    std::optional<double> d_constant;
    DecouplingSearch search;
    std::vector<Offset> offsets;
    double c_h = 0.0;
    std::optional<int> assembly_half_side;
    std::vector<double> times;
    double t = 1.0;
    std::vector<int> distances;
    std::optional<TimeDecaySpec> time_decay;
    double t_max = 64.0;
    LatticeVector phi;
    std::optional<double> weight_gamma;
    int samples = 512;
    std::optional<std::string> expect;
    bool check_am_bound = false;
    double bin_width = 0.1;
    std::optional<EdgeContrast> contrast;
    double gamma = 1.0;
    Site site;
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::norms;
    std::uint64_t seed = 0;
    std::string output;
    std::string canonical;  // normalized JSON text of the accepted document
    ExperimentParams params;
};

struct ValidationReport {
    std::optional<ExperimentConfig> config;
    std::vector<std::string> violations;
    /// Quantities computed from the config, e.g. s-norm and lambda threshold.
    std::vector<std::pair<std::string, double>> derived;

    bool ok() const { return violations.empty(); }
};

/// Parses and checks a JSON config. Never throws on malformed input: every problem
/// is reported as "<field>: <constraint>". With seed_override, that seed replaces
/// every seed in the document.
ValidationReport validate_config(std::string_view raw, std::optional<std::uint64_t> seed_override = std::nullopt);

struct Artifact {
    std::string name;
    std::string content;
};

struct Verdict {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct RunOutcome {
    std::vector<Artifact> artifacts;
    std::vector<Verdict> verdicts;

    bool pass() const;
    const Artifact* find(std::string_view name) const;
};

/// Runs the kind's pipeline in memory. Artifacts are handed to `sink` as soon as
/// they exist, so a later failure still leaves the earlier ones behind.
RunOutcome execute(const ExperimentConfig& cfg, const std::function<void(const Artifact&)>& sink = {});

struct FileRecord {
    std::string name;
    std::string sha256;
    std::uint64_t bytes = 0;
};

struct RunManifest {
    std::string kind;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string version = kArtifactVersion;
    double wall_seconds = 0.0;
    int threads = 1;
    std::vector<FileRecord> files;
    std::vector<Verdict> verdicts;
    std::string status;  // "pass", "fail" or "error"
    std::string failure;
    std::filesystem::path directory;

    std::string to_json() const;
    bool pass() const { return status == "pass"; }
};

/// Executes into a temporary sibling of `out`, then renames it into place. On an
/// exception the partial artifacts move to `out/failed` with a manifest naming the
/// failure, and the exception is rethrown.
RunManifest run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out);

/// Drops the first line (the header) of a CSV text.
std::string csv_body(std::string_view csv);

}  // namespace sparseloc
