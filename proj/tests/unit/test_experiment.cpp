#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <omp.h>

#include "sparseloc/errors.hpp"
#include "sparseloc/experiment.hpp"
#include "sparseloc/presets.hpp"
#include "sparseloc/textio.hpp"

using namespace sparseloc;
namespace fs = std::filesystem;

namespace {

bool mentions(const ValidationReport& r, const std::string& needle) {
    for (const auto& v : r.violations)
        if (v.find(needle) != std::string::npos)
            return true;
    return false;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("sparseloc_test_" + name);
    fs::remove_all(p);
    return p;
}

const char* kMoments = R"({"kind": "moments", "nu": 1, "seed": 3, "half_side": 15,
    "disorder": {"law": "uniform", "params": [-1, 1], "lambda": 4},
    "energy": 2.5, "epsilon": 0.01, "s": 0.5, "realizations": 12})";

}  // namespace

TEST_CASE("sparseness below four dimensions is refused with the window arithmetic") {
    const auto r = validate_config(R"({"kind": "sparseness", "nu": 3, "t_max": 16,
        "support": {"type": "sparse", "alpha": 0.1}})");
    CHECK_FALSE(r.ok());
    CHECK(mentions(r, "nu: sparseness requires nu >= 4"));
    CHECK(mentions(r, "2(1/3 - 1/nu) = 0 is empty"));
}

TEST_CASE("alpha outside the window is refused") {
    const auto r = validate_config(R"({"kind": "sparseness", "nu": 5, "t_max": 16,
        "support": {"type": "sparse", "alpha": 0.3}})");
    CHECK(mentions(r, "support.alpha: must satisfy 0 < alpha < 2(1/3 - 1/nu)"));
}

TEST_CASE("all violations are reported together") {
    const auto r = validate_config(R"({"kind": "moments", "nu": 1, "half_side": 10, "colour": 1,
        "disorder": {"law": "uniform", "params": [-1, 1], "lambda": 4},
        "energy": 1, "epsilon": -1, "s": 1.2, "realizations": 12})");
    CHECK(mentions(r, "s: s in (0,1) required"));
    CHECK(mentions(r, "epsilon: epsilon > 0 required"));
    CHECK(mentions(r, "colour: unknown key"));
    CHECK(r.violations.size() == 3);
}

TEST_CASE("nested unknown keys and type errors name the field") {
    const auto r = validate_config(R"({"kind": "moments", "nu": "one", "half_side": 10,
        "disorder": {"law": "uniform", "params": [-1, 1], "lamda": 4},
        "energy": 1, "epsilon": 0.1, "s": 0.5, "realizations": 12})");
    CHECK(mentions(r, "nu: must be an integer"));
    CHECK(mentions(r, "disorder.lamda: unknown key"));
    CHECK(mentions(r, "disorder.lambda: is required"));
}

TEST_CASE("validation is total on malformed input") {
    CHECK(mentions(validate_config("{not json"), "not valid JSON"));
    CHECK_FALSE(validate_config("[]").ok());
    CHECK_FALSE(validate_config("{}").ok());
    CHECK_FALSE(validate_config(R"({"kind": "warp"})").ok());
    std::mt19937_64 gen(9);
    const std::string base = kMoments;
    for (int i = 0; i < 500; ++i) {
        std::string s = base;
        const int edits = 1 + static_cast<int>(gen() % 4);
        for (int e = 0; e < edits; ++e) {
            const auto pos = gen() % s.size();
            switch (gen() % 3) {
            case 0: s.erase(pos, 1); break;
            case 1: s.insert(pos, 1, "{}[]\":,-.0e9tn"[gen() % 14]); break;
            default: s[pos] = static_cast<char>(32 + gen() % 95);
            }
        }
        CHECK_NOTHROW(validate_config(s));
    }
}

TEST_CASE("a valid moments config echoes derived quantities") {
    const auto r = validate_config(kMoments);
    REQUIRE(r.ok());
    std::map<std::string, double> d(r.derived.begin(), r.derived.end());
    CHECK(d.at("h0_norm_s") == doctest::Approx(4.0));
    CHECK(d.at("kappa_hat") == doctest::Approx(0.61052).epsilon(1e-4));
    CHECK(d.at("lambda_threshold") == doctest::Approx(std::pow(2.0 / d.at("kappa_hat"), 2.0)));
    CHECK(r.config->params.source == origin(1));
}

TEST_CASE("norms run gives (2 nu)^(1/s)") {
    const auto r = validate_config(R"({"kind": "norms", "nu": 2, "s_grid": [0.3, 0.5, 0.9]})");
    REQUIRE(r.ok());
    const auto out = execute(*r.config);
    CHECK(out.pass());
    std::istringstream csv(out.find("norms.csv")->content);
    std::string line;
    std::getline(csv, line);
    CHECK(line == "s,s_norm,s_norm_pow_s,closed_form,rel_error");
    int rows = 0;
    while (std::getline(csv, line)) {
        const double s = std::stod(line.substr(0, line.find(',')));
        const double v = std::stod(line.substr(line.find(',') + 1));
        CHECK(std::abs(v / std::pow(4.0, 1.0 / s) - 1.0) < 1e-12);
        ++rows;
    }
    CHECK(rows == 3);
}

TEST_CASE("reruns reproduce bytes; seed override changes them") {
    const auto a = execute(*validate_config(kMoments).config);
    const auto b = execute(*validate_config(kMoments).config);
    const auto c = execute(*validate_config(kMoments, 4).config);
    CHECK(a.find("moments.csv")->content == b.find("moments.csv")->content);
    CHECK(a.find("moments_sites.csv")->content == b.find("moments_sites.csv")->content);
    CHECK(a.find("moments.csv")->content != c.find("moments.csv")->content);
    CHECK(c.find("config.json")->content.find("\"seed\": 4") != std::string::npos);
}

TEST_CASE("thread count does not change artifacts") {
    const auto cfg = *validate_config(kMoments).config;
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const auto one = execute(cfg);
    omp_set_num_threads(3);
    const auto three = execute(cfg);
    omp_set_num_threads(saved);
    REQUIRE(one.artifacts.size() == three.artifacts.size());
    for (std::size_t i = 0; i < one.artifacts.size(); ++i)
        CHECK(one.artifacts[i].content == three.artifacts[i].content);
}

TEST_CASE("run_experiment writes a manifest whose checksums match the files") {
    const auto dir = scratch("manifest");
    const auto m = run_experiment(*validate_config(kMoments).config, dir);
    CHECK(m.status == "pass");
    CHECK(fs::exists(dir / "manifest.json"));
    CHECK_FALSE(fs::exists(fs::path(dir.string() + ".tmp-" + std::to_string(::getpid()))));
    REQUIRE(m.files.size() >= 3);
    for (const auto& f : m.files) {
        const auto body = slurp(dir / f.name);
        CHECK(sha256_hex(body) == f.sha256);
        CHECK(body.size() == f.bytes);
    }
    CHECK(m.config_hash == sha256_hex(validate_config(kMoments).config->canonical));
    const auto again = run_experiment(*validate_config(kMoments).config, dir);
    for (std::size_t i = 0; i < m.files.size(); ++i)
        CHECK(again.files[i].sha256 == m.files[i].sha256);
    fs::remove_all(dir);
}

TEST_CASE("a failing pipeline leaves its partial artifacts under failed/") {
    // Too few realizations for six reliable distance bins.
    const auto r = validate_config(R"({"kind": "decay_fit", "nu": 1, "seed": 1, "half_side": 30,
        "disorder": {"law": "uniform", "params": [-1, 1], "lambda": 30},
        "energy": 5, "epsilon": 0.001, "s": 0.5, "realizations": 2})");
    REQUIRE(r.ok());
    const auto dir = scratch("failed");
    CHECK_THROWS_AS(run_experiment(*r.config, dir), FitDegenerateError);
    CHECK(fs::exists(dir / "failed" / "manifest.json"));
    CHECK(fs::exists(dir / "failed" / "moments.csv"));
    const auto manifest = slurp(dir / "failed" / "manifest.json");
    CHECK(manifest.find("\"status\": \"error\"") != std::string::npos);
    CHECK(manifest.find("decay_fit pipeline failed after artifact decay_bins.csv") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("verdict failures are reported, not thrown") {
    const auto r = validate_config(R"({"kind": "simon_wolff", "nu": 1, "half_side": 50,
        "disorder": {"law": "uniform", "params": [-1, 1], "lambda": 0},
        "energy": 0.3, "epsilon_ladder": [0.1, 0.05], "realizations": 2, "expect": "pp"})");
    REQUIRE(r.ok());
    const auto out = execute(*r.config);
    CHECK_FALSE(out.pass());
    CHECK(out.verdicts.at(0).name == "trend_pp");
}

TEST_CASE("every preset validates") {
    for (const auto& p : presets()) {
        const auto r = validate_config(p.config);
        CHECK_MESSAGE(r.ok(), p.name);
    }
}

TEST_CASE("desk-scale moments preset matches its pinned baseline") {
    const auto out = execute(*validate_config(preset("moments_desk").config).config);
    CHECK(sha256_hex(out.find("moments.csv")->content) ==
          "09a570096aae26df5cac72446996711e906159c8dd02aefaf10e9bae1106af1b");
    CHECK(sha256_hex(out.find("moments_sites.csv")->content) ==
          "caaca1dd321c3b9ca3f5890d0a32babfe9d80494a594c2dfa9035c1cc56c427c");
}

TEST_CASE("every kind runs on a tiny config") {
    const std::vector<std::string> configs{
        R"({"kind": "kernel", "nu": 1, "symbol": [[{"k": 1, "c": 1}, {"k": 2, "c": 0.25}]], "max_distance": 6,
            "assembly_half_side": 2})",
        R"({"kind": "propagator", "nu": 1, "times": [1, 2], "max_distance": 60})",
        R"({"kind": "decay_check", "nu": 1, "t": 2, "distances": [8, 9, 12, 30]})",
        R"({"kind": "cook", "nu": 1, "support": {"type": "explicit", "sites": [[0], [3]]},
            "disorder": {"law": "gaussian", "params": [0, 1], "lambda": 1}, "times": [0.5, 1]})",
        R"({"kind": "thresholds", "nu": 1, "s": 0.5, "energy": 5,
            "disorder": {"law": "uniform", "params": [-1, 1], "lambda": 30}})",
        R"({"kind": "edge_scan", "nu": 1, "half_side": 20, "realizations": 20, "s": 0.5,
            "disorder": {"law": "uniform", "params": [-1, 1], "lambda": 2}})",
        R"({"kind": "theorem2_cube", "nu": 2, "s": 0.5, "gamma": 1, "half_side": 6,
            "support": {"type": "sparse", "alpha": 0.6, "generator": "deterministic_powers"},
            "disorder": {"law": "uniform", "params": [-1, 1], "lambda": 1}})",
        R"({"kind": "sparseness", "nu": 4, "t_max": 4, "samples": 32,
            "support": {"type": "sparse", "alpha": 0.1, "generator": "bernoulli_thinned"}})",
    };
    for (const auto& c : configs) {
        const auto r = validate_config(c);
        REQUIRE_MESSAGE(r.ok(), c);
        const auto out = execute(*r.config);
        CHECK_MESSAGE(out.artifacts.size() >= 2, c);
    }
}
