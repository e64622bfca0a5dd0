#include "sparseloc/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include <unistd.h>

#include <omp.h>

#include <json.hpp>

#include "sparseloc/errors.hpp"
#include "sparseloc/spectra.hpp"
#include "sparseloc/textio.hpp"

namespace sparseloc {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct KindName {
    ExperimentKind kind;
    const char* name;
};

constexpr KindName kKindNames[] = {
    {ExperimentKind::norms, "norms"},
    {ExperimentKind::kernel, "kernel"},
    {ExperimentKind::propagator, "propagator"},
    {ExperimentKind::decay_check, "decay_check"},
    {ExperimentKind::sparseness, "sparseness"},
    {ExperimentKind::cook, "cook"},
    {ExperimentKind::moments, "moments"},
    {ExperimentKind::decay_fit, "decay_fit"},
    {ExperimentKind::simon_wolff, "simon_wolff"},
    {ExperimentKind::thresholds, "thresholds"},
    {ExperimentKind::edge_scan, "edge_scan"},
    {ExperimentKind::theorem2_cube, "theorem2_cube"},
};

// ---------------------------------------------------------------------------
// Strict JSON reading. Every accessor marks its key as known; finish() reports
// the keys nobody asked for.

struct Issues {
    std::vector<std::string> list;
    void add(const std::string& field, const std::string& msg) { list.push_back(field + ": " + msg); }
};

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

std::string describe(const std::exception& e) { return e.what(); }

class Block {
public:
    Block(const json* j, std::string path, Issues& issues) : j_(j), path_(std::move(path)), issues_(issues) {
        if (j_ && !j_->is_object()) {
            issues_.add(path_.empty() ? "<document>" : path_, "must be an object");
            j_ = nullptr;
        }
    }

    bool ok() const { return j_ != nullptr; }
    std::string field(const std::string& key) const { return join(path_, key); }

    const json* raw(const std::string& key) {
        used_.insert(key);
        if (!j_)
            return nullptr;
        const auto it = j_->find(key);
        return it == j_->end() ? nullptr : &*it;
    }

    bool has(const std::string& key) { return raw(key) != nullptr; }

    void missing(const std::string& key) { issues_.add(field(key), "is required"); }

    std::optional<double> number(const std::string& key, bool required = false) {
        const json* v = raw(key);
        if (!v) {
            if (required && j_)
                missing(key);
            return std::nullopt;
        }
        if (!v->is_number()) {
            issues_.add(field(key), "must be a number");
            return std::nullopt;
        }
        const double x = v->get<double>();
        if (!std::isfinite(x)) {
            issues_.add(field(key), "must be finite");
            return std::nullopt;
        }
        return x;
    }

    std::optional<long long> integer(const std::string& key, bool required = false) {
        const json* v = raw(key);
        if (!v) {
            if (required && j_)
                missing(key);
            return std::nullopt;
        }
        if (v->is_number_unsigned()) {
            const auto u = v->get<std::uint64_t>();
            if (u > static_cast<std::uint64_t>(std::numeric_limits<int>::max())) {
                issues_.add(field(key), "is out of range");
                return std::nullopt;
            }
            return static_cast<long long>(u);
        }
        if (v->is_number_integer()) {
            const auto x = v->get<long long>();
            if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
                issues_.add(field(key), "is out of range");
                return std::nullopt;
            }
            return x;
        }
        issues_.add(field(key), "must be an integer");
        return std::nullopt;
    }

    std::optional<std::uint64_t> seed(const std::string& key) {
        const json* v = raw(key);
        if (!v)
            return std::nullopt;
        if (v->is_number_unsigned())
            return v->get<std::uint64_t>();
        if (v->is_number_integer() && v->get<long long>() >= 0)
            return static_cast<std::uint64_t>(v->get<long long>());
        issues_.add(field(key), "must be a non-negative integer below 2^64");
        return std::nullopt;
    }

    std::optional<std::string> string(const std::string& key, bool required = false) {
        const json* v = raw(key);
        if (!v) {
            if (required && j_)
                missing(key);
            return std::nullopt;
        }
        if (!v->is_string()) {
            issues_.add(field(key), "must be a string");
            return std::nullopt;
        }
        return v->get<std::string>();
    }

    std::optional<bool> boolean(const std::string& key) {
        const json* v = raw(key);
        if (!v)
            return std::nullopt;
        if (!v->is_boolean()) {
            issues_.add(field(key), "must be true or false");
            return std::nullopt;
        }
        return v->get<bool>();
    }

    std::optional<std::vector<double>> numbers(const std::string& key, bool required = false) {
        const json* v = raw(key);
        if (!v) {
            if (required && j_)
                missing(key);
            return std::nullopt;
        }
        if (!v->is_array() || v->empty()) {
            issues_.add(field(key), "must be a non-empty array of numbers");
            return std::nullopt;
        }
        std::vector<double> out;
        for (std::size_t i = 0; i < v->size(); ++i) {
            const json& e = (*v)[i];
            if (!e.is_number() || !std::isfinite(e.get<double>())) {
                issues_.add(field(key) + "[" + std::to_string(i) + "]", "must be a finite number");
                return std::nullopt;
            }
            out.push_back(e.get<double>());
        }
        return out;
    }

    void finish() {
        if (!j_)
            return;
        for (const auto& [key, value] : j_->items())
            if (!used_.count(key))
                issues_.add(field(key), "unknown key");
    }

    Issues& issues() { return issues_; }

private:
    const json* j_;
    std::string path_;
    Issues& issues_;
    std::set<std::string> used_;
};

std::optional<Site> parse_site(const json& v, const std::string& field, int nu, Issues& issues) {
    if (!v.is_array()) {
        issues.add(field, "must be an array of " + std::to_string(nu) + " integers");
        return std::nullopt;
    }
    if (static_cast<int>(v.size()) != nu) {
        issues.add(field, "has " + std::to_string(v.size()) + " coordinates, nu = " + std::to_string(nu));
        return std::nullopt;
    }
    std::vector<int> c;
    for (const auto& e : v) {
        if (!e.is_number_integer() || std::abs(e.get<long long>()) > 1'000'000) {
            issues.add(field, "coordinates must be integers with |x| <= 10^6");
            return std::nullopt;
        }
        c.push_back(static_cast<int>(e.get<long long>()));
    }
    return Site(std::move(c));
}

std::optional<std::vector<Site>> parse_sites(Block& b, const std::string& key, int nu, bool required = false) {
    const json* v = b.raw(key);
    if (!v) {
        if (required && b.ok())
            b.missing(key);
        return std::nullopt;
    }
    if (!v->is_array()) {
        b.issues().add(b.field(key), "must be an array of sites");
        return std::nullopt;
    }
    std::vector<Site> out;
    bool good = true;
    for (std::size_t i = 0; i < v->size(); ++i) {
        auto s = parse_site((*v)[i], b.field(key) + "[" + std::to_string(i) + "]", nu, b.issues());
        if (s)
            out.push_back(*s);
        else
            good = false;
    }
    if (!good)
        return std::nullopt;
    return out;
}

std::optional<Site> site_field(Block& b, const std::string& key, int nu) {
    const json* v = b.raw(key);
    if (!v)
        return std::nullopt;
    return parse_site(*v, b.field(key), nu, b.issues());
}

// ---------------------------------------------------------------------------
// Shared parameter blocks.

struct Context {
    Issues& issues;
    ExperimentParams& p;
    std::optional<std::uint64_t> seed_override;
    std::uint64_t seed = 0;
    bool operator_ok = false;
};

void parse_operator(Block& top, Context& cx) {
    const auto nu = top.integer("nu", true);
    if (!nu)
        return;
    if (*nu < 1 || *nu > 8) {
        cx.issues.add("nu", "must lie in [1, 8]");
        return;
    }
    cx.p.nu = static_cast<int>(*nu);
    cx.p.symbol = cosine_symbol(cx.p.nu);
    if (const json* v = top.raw("symbol")) {
        if (!v->is_array()) {
            cx.issues.add("symbol", "must be an array with one list of {k, c} terms per axis");
            return;
        }
        if (static_cast<int>(v->size()) != cx.p.nu) {
            cx.issues.add("symbol", "has " + std::to_string(v->size()) + " axes, nu = " + std::to_string(cx.p.nu));
            return;
        }
        SymbolSpec spec;
        bool good = true;
        for (std::size_t i = 0; i < v->size(); ++i) {
            const std::string f = "symbol[" + std::to_string(i) + "]";
            const json& axis = (*v)[i];
            if (!axis.is_array() || axis.empty()) {
                cx.issues.add(f, "must be a non-empty array of {k, c} terms");
                good = false;
                continue;
            }
            std::vector<CosineTerm> terms;
            for (std::size_t j = 0; j < axis.size(); ++j) {
                Block term(&axis[j], f + "[" + std::to_string(j) + "]", cx.issues);
                const auto k = term.integer("k", true);
                const auto c = term.number("c", true);
                term.finish();
                if (k && *k < 1) {
                    cx.issues.add(term.field("k"), "must be >= 1");
                    good = false;
                }
                if (!k || !c) {
                    good = false;
                    continue;
                }
                terms.push_back({static_cast<int>(*k), *c});
            }
            spec.axes.push_back(std::move(terms));
        }
        if (!good)
            return;
        try {
            validate(spec);
        } catch (const std::exception& e) {
            cx.issues.add("symbol", describe(e));
            return;
        }
        cx.p.symbol = std::move(spec);
    }
    cx.operator_ok = true;
}

bool s_in_open_unit(double s) { return s > 0.0 && s < 1.0; }

void parse_s(Block& top, Context& cx, bool required) {
    if (const auto s = top.number("s", required)) {
        if (!s_in_open_unit(*s))
            cx.issues.add("s", "s in (0,1) required");
        else
            cx.p.s = *s;
    }
}

void parse_volume(Block& top, Context& cx, bool required) {
    const bool has_half = top.has("half_side");
    const bool has_side = top.has("side");
    if (has_half && has_side) {
        cx.issues.add("side", "give either side or half_side, not both");
        return;
    }
    int half = -1;
    if (has_half) {
        if (const auto h = top.integer("half_side")) {
            if (*h < 1)
                cx.issues.add("half_side", "must be >= 1");
            else
                half = static_cast<int>(*h);
        }
    } else if (has_side) {
        if (const auto s = top.integer("side")) {
            if (*s < 3 || *s % 2 == 0)
                cx.issues.add("side", "must be odd and >= 3 (cubes are centered, side = 2 half_side + 1)");
            else
                half = static_cast<int>((*s - 1) / 2);
        }
    } else if (required) {
        cx.issues.add("half_side", "is required (or side)");
    }
    Site center = origin(cx.p.nu);
    if (cx.operator_ok)
        if (auto c = site_field(top, "center", cx.p.nu))
            center = *c;
    if (!cx.operator_ok)
        top.raw("center");
    if (half >= 1 && cx.operator_ok) {
        const double vol = std::pow(2.0 * half + 1.0, cx.p.nu);
        if (vol > 5e7)
            cx.issues.add(has_side ? "side" : "half_side", "cube volume above 5e7 sites");
        else
            cx.p.volume = Cube(center, half);
    }
}

void parse_support(Block& top, Context& cx, bool allow_full) {
    const json* v = top.raw("support");
    if (!v) {
        cx.p.support.type = allow_full ? SupportType::full : SupportType::sparse;
        if (!allow_full)
            cx.issues.add("support", "is required");
        return;
    }
    Block b(v, "support", cx.issues);
    const auto type = b.string("type", true);
    auto& sp = cx.p.support;
    sp.seed = cx.seed;
    if (type) {
        if (*type == "full")
            sp.type = SupportType::full;
        else if (*type == "empty")
            sp.type = SupportType::empty;
        else if (*type == "sparse")
            sp.type = SupportType::sparse;
        else if (*type == "explicit")
            sp.type = SupportType::explicit_list;
        else
            cx.issues.add("support.type", "must be one of full, empty, sparse, explicit");
        if (!allow_full && (sp.type == SupportType::full || sp.type == SupportType::empty))
            cx.issues.add("support.type", "must be sparse or explicit for this kind");
    }
    if (type && (*type == "sparse" || *type == "explicit")) {
        const auto alpha = b.number("alpha", *type == "sparse");
        if (alpha) {
            if (!(*alpha > 0.0 && *alpha < 1.0))
                cx.issues.add("support.alpha", "must lie in (0, 1)");
            sp.alpha = *alpha;
            sp.check_cap = true;
        }
    }
    if (type && *type == "sparse") {
        if (const auto g = b.string("generator")) {
            try {
                sp.generator = parse_generator(*g);
                if (sp.generator == SparseGenerator::explicit_list)
                    cx.issues.add("support.generator", "use type explicit for a site list");
            } catch (const std::exception& e) {
                cx.issues.add("support.generator", describe(e));
            }
        }
        if (const auto s = b.seed("seed"))
            sp.seed = *s;
        if (cx.seed_override)
            sp.seed = *cx.seed_override;
    }
    if (type && *type == "explicit" && cx.operator_ok) {
        if (auto sites = parse_sites(b, "sites", cx.p.nu, true))
            sp.sites = std::move(*sites);
    }
    if (type && *type == "explicit" && !cx.operator_ok)
        b.raw("sites");
    b.finish();
}

void parse_disorder(Block& top, Context& cx, bool required, bool allow_weight) {
    const json* v = top.raw("disorder");
    if (!v) {
        if (required)
            cx.issues.add("disorder", "is required");
        return;
    }
    Block b(v, "disorder", cx.issues);
    DisorderModel m;
    m.seed = cx.seed;
    bool good = true;
    if (const auto law = b.string("law", true)) {
        try {
            m.law.kind = parse_law(*law);
        } catch (const std::exception& e) {
            cx.issues.add("disorder.law", describe(e));
            good = false;
        }
    } else {
        good = false;
    }
    if (const auto params = b.numbers("params", true)) {
        if (params->size() != 2) {
            cx.issues.add("disorder.params", "must hold exactly two numbers");
            good = false;
        } else {
            m.law.p1 = (*params)[0];
            m.law.p2 = (*params)[1];
        }
    } else {
        good = false;
    }
    if (good) {
        try {
            m.law.validate();
            if (!m.law.absolutely_continuous())
                cx.issues.add("disorder.params", "the law must be absolutely continuous");
        } catch (const std::exception& e) {
            cx.issues.add("disorder.params", describe(e));
            good = false;
        }
    }
    if (const auto lambda = b.number("lambda", true)) {
        if (*lambda < 0.0)
            cx.issues.add("disorder.lambda", "must be >= 0");
        m.lambda = *lambda;
    } else {
        good = false;
    }
    if (const json* w = b.raw("weight")) {
        if (!allow_weight) {
            cx.issues.add("disorder.weight", "weights are not supported by this kind");
        } else {
            Block wb(w, "disorder.weight", cx.issues);
            if (const auto g = wb.number("gamma", true)) {
                if (!(*g > 0.0))
                    cx.issues.add("disorder.weight.gamma", "must be > 0");
                m.weight = Weight{*g};
            }
            wb.finish();
        }
    }
    if (const auto s = b.seed("seed"))
        m.seed = *s;
    if (cx.seed_override)
        m.seed = *cx.seed_override;
    b.finish();
    if (good)
        cx.p.disorder = m;
}

void parse_decoupling(Block& top, Context& cx) {
    const json* v = top.raw("decoupling");
    if (!v)
        return;
    Block b(v, "decoupling", cx.issues);
    const auto kappa = b.number("kappa_hat");
    const auto d = b.number("D");
    const bool searching = b.has("radius") || b.has("real_points") || b.has("imag_points") || b.has("polish");
    if (static_cast<int>(kappa.has_value()) + static_cast<int>(d.has_value()) + static_cast<int>(searching) > 1)
        cx.issues.add("decoupling", "kappa_hat, D and search settings are mutually exclusive");
    if (kappa) {
        if (!(*kappa > 0.0 && *kappa <= 1.0))
            cx.issues.add("decoupling.kappa_hat", "must lie in (0, 1]");
        cx.p.kappa_hat = *kappa;
    }
    if (d) {
        if (!(*d > 0.0))
            cx.issues.add("decoupling.D", "must be > 0");
        cx.p.d_constant = *d;
    }
    if (const auto r = b.number("radius")) {
        if (!(*r > 0.0))
            cx.issues.add("decoupling.radius", "must be > 0");
        cx.p.search.radius = *r;
    }
    if (const auto n = b.integer("real_points")) {
        if (*n < 3)
            cx.issues.add("decoupling.real_points", "must be >= 3");
        cx.p.search.real_points = static_cast<int>(*n);
    }
    if (const auto n = b.integer("imag_points")) {
        if (*n < 1)
            cx.issues.add("decoupling.imag_points", "must be >= 1");
        cx.p.search.imag_points = static_cast<int>(*n);
    }
    if (const auto pol = b.boolean("polish"))
        cx.p.search.polish = *pol;
    b.finish();
}

void parse_energies(Block& top, Context& cx, bool allow_list) {
    const bool single = top.has("energy");
    const bool list = allow_list && top.has("energies");
    if (single && list) {
        cx.issues.add("energies", "give either energy or energies, not both");
        return;
    }
    if (list) {
        if (auto e = top.numbers("energies"))
            cx.p.energies = *e;
    } else if (auto e = top.number("energy", true)) {
        cx.p.energies = {*e};
    }
}

void parse_epsilon(Block& top, Context& cx) {
    if (const auto e = top.number("epsilon", true)) {
        if (!(*e > 0.0))
            cx.issues.add("epsilon", "epsilon > 0 required");
        cx.p.epsilon = *e;
    }
}

void parse_realizations(Block& top, Context& cx, int minimum) {
    if (const auto r = top.integer("realizations", true)) {
        if (*r < minimum)
            cx.issues.add("realizations", "must be >= " + std::to_string(minimum));
        cx.p.realizations = static_cast<int>(*r);
    }
}

void parse_source(Block& top, Context& cx) {
    if (!cx.operator_ok) {
        top.raw("source");
        return;
    }
    if (auto s = site_field(top, "source", cx.p.nu))
        cx.p.source = *s;
    if (cx.p.volume) {
        if (!cx.p.source)
            cx.p.source = cx.p.volume->center;
        else if (!cx.p.volume->contains(*cx.p.source))
            cx.issues.add("source", "must lie inside the volume");
    }
}

void parse_phi(Block& top, Context& cx) {
    if (!cx.operator_ok) {
        top.raw("phi");
        return;
    }
    const json* v = top.raw("phi");
    if (!v) {
        cx.p.phi = delta_vector(origin(cx.p.nu));
        return;
    }
    if (!v->is_array() || v->empty()) {
        cx.issues.add("phi", "must be a non-empty array of {site, re, im}");
        return;
    }
    LatticeVector phi;
    for (std::size_t i = 0; i < v->size(); ++i) {
        Block e(&(*v)[i], "phi[" + std::to_string(i) + "]", cx.issues);
        std::optional<Site> site;
        if (const json* sv = e.raw("site"))
            site = parse_site(*sv, e.field("site"), cx.p.nu, cx.issues);
        else if (e.ok())
            e.missing("site");
        const auto re = e.number("re");
        const auto im = e.number("im");
        e.finish();
        if (site)
            phi[*site] += cplx(re.value_or(0.0), im.value_or(0.0));
    }
    cx.p.phi = std::move(phi);
}

void parse_times(Block& top, Context& cx, const std::string& key) {
    if (auto t = top.numbers(key, true)) {
        for (double x : *t)
            if (x < 0.0) {
                cx.issues.add(key, "times must be >= 0");
                break;
            }
        cx.p.times = *t;
    }
}

void parse_offsets(Block& top, Context& cx, int default_max) {
    const bool list = top.has("offsets");
    const bool box = top.has("max_distance");
    if (list && box) {
        cx.issues.add("offsets", "give either offsets or max_distance, not both");
        return;
    }
    if (!cx.operator_ok)
        return;
    if (list) {
        if (auto o = parse_sites(top, "offsets", cx.p.nu)) {
            if (o->empty())
                cx.issues.add("offsets", "must not be empty");
            cx.p.offsets = std::move(*o);
        }
        return;
    }
    int r = default_max;
    if (const auto m = top.integer("max_distance")) {
        if (*m < 0 || *m > 10000)
            cx.issues.add("max_distance", "must lie in [0, 10000]");
        else
            r = static_cast<int>(*m);
    }
    if (std::pow(2.0 * r + 1.0, cx.p.nu) > 2e6) {
        cx.issues.add("max_distance", "offset box above 2e6 points");
        return;
    }
    cx.p.offsets = cube_sites(Cube(origin(cx.p.nu), r));
}

// Derived quantities echoed by the validation report.
void derive(const ExperimentConfig& cfg, ValidationReport& rep) {
    const auto& p = cfg.params;
    const KernelOperator k = kernel_from_symbol(p.symbol);
    rep.derived.emplace_back("h0_norm_1", k.s_norm(1.0));
    const bool uses_s = cfg.kind == ExperimentKind::moments || cfg.kind == ExperimentKind::decay_fit ||
                        cfg.kind == ExperimentKind::thresholds || cfg.kind == ExperimentKind::edge_scan ||
                        cfg.kind == ExperimentKind::theorem2_cube;
    if (!uses_s)
        return;
    rep.derived.emplace_back("h0_norm_s", k.s_norm(p.s));
    std::optional<DecouplingEstimate> dec;
    if (p.kappa_hat)
        dec = decoupling_override(p.s, *p.kappa_hat);
    else if (p.d_constant)
        dec = decoupling_from_constant(p.s, *p.d_constant);
    else if (p.disorder && cfg.kind != ExperimentKind::edge_scan)
        dec = estimate_decoupling(p.disorder->law, p.s, p.search);
    if (dec) {
        rep.derived.emplace_back("kappa_hat", dec->kappa_hat);
        rep.derived.emplace_back("lambda_threshold", lambda_threshold(k, p.s, *dec));
    }
}

// ---------------------------------------------------------------------------
// Per-kind schemas.

void schema(ExperimentKind kind, Block& top, Context& cx) {
    auto& p = cx.p;
    parse_operator(top, cx);
    switch (kind) {
    case ExperimentKind::norms:
        if (auto g = top.numbers("s_grid", true)) {
            for (double s : *g)
                if (!(s > 0.0 && s <= 1.0)) {
                    cx.issues.add("s_grid", "entries must lie in (0, 1]");
                    break;
                }
            p.s_grid = *g;
        }
        break;
    case ExperimentKind::kernel:
        parse_offsets(top, cx, 8);
        if (const auto c = top.number("c_h")) {
            if (*c < 0.0)
                cx.issues.add("c_h", "must be >= 0 (0 requests estimation)");
            p.c_h = *c;
        }
        if (const auto l = top.integer("assembly_half_side")) {
            if (*l < 0 || std::pow(2.0 * *l + 1.0, p.nu) > 1e6)
                cx.issues.add("assembly_half_side", "must be >= 0 with at most 1e6 sites");
            else
                p.assembly_half_side = static_cast<int>(*l);
        }
        break;
    case ExperimentKind::propagator:
        parse_times(top, cx, "times");
        parse_offsets(top, cx, 30);
        break;
    case ExperimentKind::decay_check: {
        if (const auto t = top.number("t"))
            p.t = *t;
        if (const json* d = top.raw("distances")) {
            if (d->is_object()) {
                Block db(d, "distances", cx.issues);
                const auto lo = db.integer("min", true);
                const auto hi = db.integer("max", true);
                db.finish();
                if (lo && hi) {
                    if (*lo < 1 || *hi < *lo || *hi > 100000)
                        cx.issues.add("distances", "need 1 <= min <= max <= 100000");
                    else
                        for (long long x = *lo; x <= *hi; ++x)
                            p.distances.push_back(static_cast<int>(x));
                }
            } else if (auto list = top.numbers("distances")) {
                for (double x : *list) {
                    if (x < 1.0 || x != std::floor(x) || x > 100000) {
                        cx.issues.add("distances", "entries must be integers in [1, 100000]");
                        break;
                    }
                    p.distances.push_back(static_cast<int>(x));
                }
            }
        }
        if (const json* td = top.raw("time_decay")) {
            Block tb(td, "time_decay", cx.issues);
            TimeDecaySpec spec;
            if (tb.has("t")) {
                if (auto t = tb.numbers("t"))
                    spec.t = *t;
            } else {
                const auto lo = tb.number("t_min", true);
                const auto hi = tb.number("t_max", true);
                const auto n = tb.integer("points", true);
                if (lo && hi && n) {
                    if (*n < 2 || !(*lo > 0.0) || !(*hi > *lo))
                        cx.issues.add("time_decay", "need points >= 2 and 0 < t_min < t_max");
                    else
                        for (long long i = 0; i < *n; ++i)
                            spec.t.push_back(*lo * std::pow(*hi / *lo, static_cast<double>(i) /
                                                                           static_cast<double>(*n - 1)));
                }
            }
            for (double t : spec.t)
                if (t < 50.0 || t > 1000.0) {
                    cx.issues.add("time_decay.t", "times must lie in [50, 1000]");
                    break;
                }
            if (const auto mode = tb.string("mode")) {
                if (*mode == "max")
                    spec.mode = DecayMode::max_over_offsets;
                else if (*mode == "fixed")
                    spec.mode = DecayMode::fixed_offset;
                else
                    cx.issues.add("time_decay.mode", "must be max or fixed");
            }
            if (const auto o = tb.integer("offset"))
                spec.offset = static_cast<int>(*o);
            tb.finish();
            p.time_decay = spec;
        }
        if (p.distances.empty() && !p.time_decay)
            cx.issues.add("distances", "give distances, time_decay or both");
        break;
    }
    case ExperimentKind::sparseness: {
        if (cx.operator_ok && p.nu < 4) {
            const double w = 2.0 * (1.0 / 3.0 - 1.0 / p.nu);
            std::ostringstream os;
            os << "sparseness requires nu >= 4: the alpha window 0 < alpha < 2(1/3 - 1/nu) = " << w
               << " is empty for nu = " << p.nu;
            cx.issues.add("nu", os.str());
        }
        parse_volume(top, cx, false);
        parse_support(top, cx, false);
        if (cx.operator_ok && p.nu >= 4 && p.support.check_cap) {
            const double w = 2.0 * (1.0 / 3.0 - 1.0 / p.nu);
            if (!(p.support.alpha < w))
                cx.issues.add("support.alpha", "must satisfy 0 < alpha < 2(1/3 - 1/nu) = " + fmt(w));
        }
        if (p.support.type == SupportType::explicit_list && !p.support.check_cap)
            cx.issues.add("support.alpha", "is required for the sparseness kind");
        if (const auto t = top.number("t_max", true)) {
            if (!(*t >= 2.0))
                cx.issues.add("t_max", "must be >= 2");
            p.t_max = *t;
        }
        parse_phi(top, cx);
        if (const json* w = top.raw("weight")) {
            Block wb(w, "weight", cx.issues);
            if (const auto g = wb.number("gamma", true)) {
                if (!(*g > 0.0))
                    cx.issues.add("weight.gamma", "must be > 0");
                p.weight_gamma = *g;
            }
            wb.finish();
        }
        if (const auto n = top.integer("samples")) {
            if (*n < 16)
                cx.issues.add("samples", "must be >= 16");
            p.samples = static_cast<int>(*n);
        }
        // Default cube: the smallest one the truncation certificate accepts.
        if (cx.operator_ok && !p.volume && cx.issues.list.empty()) {
            int rho = 0;
            for (const auto& [n, v] : p.phi)
                rho = std::max(rho, max_norm(n));
            const double reach = 2.0 * p.nu * p.t_max * symbol_derivative_sup(p.symbol);
            p.volume = Cube(origin(p.nu), rho + static_cast<int>(std::ceil(reach)) + 1);
        }
        break;
    }
    case ExperimentKind::cook:
        parse_volume(top, cx, false);
        parse_support(top, cx, true);
        parse_disorder(top, cx, true, true);
        parse_phi(top, cx);
        parse_times(top, cx, "times");
        if (const auto n = top.integer("samples")) {
            if (*n < 30)
                cx.issues.add("samples", "must be >= 30");
            p.samples = static_cast<int>(*n);
        } else {
            p.samples = 30;
        }
        break;
    case ExperimentKind::moments:
    case ExperimentKind::decay_fit:
        parse_volume(top, cx, true);
        parse_support(top, cx, true);
        parse_disorder(top, cx, true, kind == ExperimentKind::moments);
        parse_energies(top, cx, kind == ExperimentKind::moments);
        parse_epsilon(top, cx);
        parse_s(top, cx, true);
        parse_realizations(top, cx, 2);
        parse_source(top, cx);
        if (kind == ExperimentKind::moments) {
            if (const auto am = top.boolean("check_am_bound"))
                p.check_am_bound = *am;
            if (p.check_am_bound && p.disorder) {
                const auto& d = *p.disorder;
                if (d.weight || !(d.lambda > 0.0))
                    cx.issues.add("check_am_bound", "needs an unweighted model with lambda > 0");
                if (d.law.kind != LawKind::uniform || d.law.p1 != -1.0 || d.law.p2 != 1.0)
                    cx.issues.add("check_am_bound", "the uniform bound is stated for uniform(-1, 1)");
            }
        } else {
            parse_decoupling(top, cx);
            if (p.disorder && !(p.disorder->lambda > 0.0))
                cx.issues.add("disorder.lambda", "decay_fit needs lambda > 0");
        }
        break;
    case ExperimentKind::simon_wolff:
        parse_volume(top, cx, true);
        parse_support(top, cx, true);
        parse_disorder(top, cx, true, true);
        parse_energies(top, cx, false);
        if (auto l = top.numbers("epsilon_ladder", true)) {
            if (l->size() < 2)
                cx.issues.add("epsilon_ladder", "needs >= 2 rungs");
            for (std::size_t i = 0; i < l->size(); ++i)
                if (!((*l)[i] > 0.0) || (i > 0 && !((*l)[i] < (*l)[i - 1]))) {
                    cx.issues.add("epsilon_ladder", "must be positive and strictly decreasing");
                    break;
                }
            p.epsilon_ladder = *l;
        }
        parse_realizations(top, cx, 2);
        parse_source(top, cx);
        if (const auto e = top.string("expect")) {
            if (*e != "ac" && *e != "pp")
                cx.issues.add("expect", "must be ac or pp");
            p.expect = *e;
        }
        break;
    case ExperimentKind::thresholds:
        parse_s(top, cx, true);
        parse_disorder(top, cx, true, false);
        parse_energies(top, cx, false);
        parse_decoupling(top, cx);
        break;
    case ExperimentKind::edge_scan:
        parse_volume(top, cx, true);
        if (p.volume && p.volume->volume() > kDenseCap)
            cx.issues.add("half_side", "volume exceeds the dense cap of " + std::to_string(kDenseCap) + " sites");
        parse_support(top, cx, true);
        parse_disorder(top, cx, true, true);
        parse_realizations(top, cx, 20);
        parse_s(top, cx, true);
        if (const auto w = top.number("bin_width")) {
            if (!(*w > 0.0))
                cx.issues.add("bin_width", "must be > 0");
            p.bin_width = *w;
        }
        if (const json* c = top.raw("contrast")) {
            Block cb(c, "contrast", cx.issues);
            EdgeContrast ec;
            if (const auto m = cb.number("margin"))
                ec.margin = *m;
            if (const auto f = cb.number("factor")) {
                if (!(*f > 0.0))
                    cx.issues.add("contrast.factor", "must be > 0");
                ec.factor = *f;
            }
            cb.finish();
            p.contrast = ec;
        }
        break;
    case ExperimentKind::theorem2_cube:
        parse_s(top, cx, true);
        if (const auto g = top.number("gamma", true)) {
            if (!(*g > 0.0))
                cx.issues.add("gamma", "must be > 0");
            p.gamma = *g;
        }
        parse_volume(top, cx, false);
        parse_support(top, cx, true);
        parse_disorder(top, cx, false, true);
        parse_decoupling(top, cx);
        if (cx.operator_ok) {
            p.site = origin(p.nu);
            if (auto s = site_field(top, "site", p.nu))
                p.site = *s;
        } else {
            top.raw("site");
        }
        if (!p.kappa_hat && !p.d_constant && !p.disorder && !top.has("disorder"))
            cx.issues.add("decoupling", "give decoupling.kappa_hat, decoupling.D or a disorder law");
        break;
    }

    // Support-dependent checks that need the volume.
    const bool uses_support = kind == ExperimentKind::cook || kind == ExperimentKind::moments ||
                              kind == ExperimentKind::decay_fit || kind == ExperimentKind::simon_wolff ||
                              kind == ExperimentKind::edge_scan || kind == ExperimentKind::theorem2_cube ||
                              kind == ExperimentKind::sparseness;
    if (uses_support) {
        const auto t = p.support.type;
        if ((t == SupportType::full || t == SupportType::sparse) && !p.volume && kind != ExperimentKind::sparseness)
            cx.issues.add("half_side", "a volume is required for this support type");
        if (t == SupportType::explicit_list && p.volume)
            for (const auto& s : p.support.sites)
                if (!p.volume->contains(s)) {
                    cx.issues.add("support.sites", "every site must lie inside the volume");
                    break;
                }
        if (t == SupportType::explicit_list && p.support.check_cap && !p.volume)
            cx.issues.add("half_side", "a volume is required to check the sparseness cap");
        if (t == SupportType::empty && kind == ExperimentKind::cook)
            cx.issues.add("support.type", "cook needs a non-empty support");
    }
}

std::string lower_kind_list() {
    std::string s;
    for (const auto& kn : kKindNames) {
        if (!s.empty())
            s += ", ";
        s += kn.name;
    }
    return s;
}

// ---------------------------------------------------------------------------
// Execution.

class Run {
public:
    Run(const std::function<void(const Artifact&)>& sink) : sink_(sink) {}

    void emit(std::string name, std::string content) {
        out.artifacts.push_back({std::move(name), std::move(content)});
        if (sink_)
            sink_(out.artifacts.back());
    }
    void verdict(std::string name, bool pass, std::string detail) {
        out.verdicts.push_back({std::move(name), pass, std::move(detail)});
    }

    RunOutcome out;

private:
    const std::function<void(const Artifact&)>& sink_;
};

std::vector<std::string> coord_header(int nu, const std::string& prefix) {
    std::vector<std::string> h;
    for (int i = 1; i <= nu; ++i)
        h.push_back(prefix + std::to_string(i));
    return h;
}

void append_coords(std::vector<std::string>& row, const Site& n) {
    for (int c : n.coords)
        row.push_back(fmt(c));
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json jnum(double x) { return std::isfinite(x) ? json(x) : json(fmt(x)); }

struct BuiltSupport {
    SiteSet sites;
    std::optional<SparseSet> sparse;
};

BuiltSupport build_support(const ExperimentParams& p, Run& run) {
    BuiltSupport b;
    switch (p.support.type) {
    case SupportType::full:
        b.sites = cube_sites(*p.volume);
        break;
    case SupportType::empty:
        break;
    case SupportType::sparse:
        b.sparse = generate_sparse_set(p.support.alpha, *p.volume, p.support.generator, p.support.seed);
        b.sites = b.sparse->sites;
        break;
    case SupportType::explicit_list:
        if (p.support.check_cap) {
            b.sparse = make_explicit_sparse_set(p.support.alpha, *p.volume, p.support.sites);
            b.sites = b.sparse->sites;
        } else {
            b.sites = make_site_set(p.support.sites);
        }
        break;
    }
    if (b.sparse)
        run.emit("sparse_set.txt", to_text(*b.sparse));
    return b;
}

bool is_laplacian(const SymbolSpec& spec) {
    for (int i = 0; i < spec.nu(); ++i) {
        const auto& a = spec.axes[static_cast<std::size_t>(i)];
        if (a.size() != 1 || a[0].k != 1 || a[0].c != 1.0)
            return false;
    }
    return true;
}

DecouplingEstimate decoupling_for(const ExperimentParams& p) {
    if (p.kappa_hat)
        return decoupling_override(p.s, *p.kappa_hat);
    if (p.d_constant)
        return decoupling_from_constant(p.s, *p.d_constant);
    if (!p.disorder)
        throw std::invalid_argument("no decoupling constant and no disorder law to estimate one");
    return estimate_decoupling(p.disorder->law, p.s, p.search);
}

json decoupling_json(const DecouplingEstimate& d) {
    return json{{"s", d.s},
                {"kappa_hat", jnum(d.kappa_hat)},
                {"d_eff", jnum(d.d_eff)},
                {"d_proof", jnum(d.d_proof)},
                {"eta", {jnum(d.eta.real()), jnum(d.eta.imag())}},
                {"beta", {jnum(d.beta.real()), jnum(d.beta.imag())}},
                {"grid_min", jnum(d.grid_min)},
                {"on_boundary", d.on_boundary}};
}

void run_norms(const ExperimentParams& p, Run& run) {
    const KernelOperator k = kernel_from_symbol(p.symbol);
    const bool lap = is_laplacian(p.symbol);
    Csv csv({"s", "s_norm", "s_norm_pow_s", "closed_form", "rel_error"});
    double worst = 0.0;
    for (double s : p.s_grid) {
        const double v = k.s_norm(s);
        const double closed = lap ? std::pow(2.0 * p.nu, 1.0 / s) : kNaN;
        const double rel = lap ? std::abs(v - closed) / closed : kNaN;
        if (lap)
            worst = std::max(worst, rel);
        csv.row({fmt(s), fmt(v), fmt(std::pow(v, s)), fmt(closed), fmt(rel)});
    }
    run.emit("norms.csv", csv.str());
    if (lap)
        run.verdict("closed_form", worst < 1e-12, "max relative error " + fmt(worst) + " (tolerance 1e-12)");
}

void run_kernel(const ExperimentParams& p, Run& run) {
    const SymbolSpec spec = p.symbol;
    const GeneralSymbol h = [spec](std::span<const double> th) {
        double v = 0.0;
        for (std::size_t i = 0; i < spec.axes.size(); ++i)
            v += axis_symbol(spec.axes[i], th[i]);
        return v;
    };
    const KernelOperator k = kernel_from_symbol(spec);
    {
        auto header = coord_header(p.nu, "d");
        header.push_back("c");
        Csv csv(header);
        for (const auto& [d, c] : k.hopping()) {
            std::vector<std::string> row;
            append_coords(row, d);
            row.push_back(fmt(c));
            csv.row(row);
        }
        run.emit("hopping.csv", csv.str());
    }
    const auto rep = kernel_decay_check(h, p.nu, p.offsets, p.c_h);
    auto header = coord_header(p.nu, "d");
    for (const char* c : {"distance", "abs_coefficient", "bound", "pass"})
        header.push_back(c);
    Csv csv(header);
    std::int64_t violations = 0;
    for (const auto& r : rep.rows) {
        std::vector<std::string> row;
        append_coords(row, r.offset);
        row.push_back(fmt(r.distance));
        row.push_back(fmt(r.abs_coefficient));
        row.push_back(fmt(r.bound));
        row.push_back(fmt(r.pass));
        csv.row(row);
        violations += r.pass ? 0 : 1;
    }
    run.emit("kernel_decay.csv", csv.str());
    run.emit("kernel_decay.json", dump(json{{"c_h", jnum(rep.c_h)},
                                            {"c_h_estimated", rep.c_h_estimated},
                                            {"grid_points_per_axis", rep.grid_points_per_axis},
                                            {"achieved_tolerance", jnum(rep.achieved_tolerance)}}));
    if (p.assembly_half_side)
        run.emit("h0.coo", to_coordinate_text(assemble_finite_volume(k, {}, Cube(origin(p.nu), *p.assembly_half_side))));
    run.verdict("coefficient_envelope", violations == 0, std::to_string(violations) + " offsets above the envelope");
}

void run_propagator(const ExperimentParams& p, Run& run) {
    int reach = 0;
    for (const auto& d : p.offsets)
        reach = std::max(reach, max_norm(d));
    const bool box = static_cast<std::int64_t>(p.offsets.size()) == Cube(origin(p.nu), reach).volume();
    bool single = true;
    for (const auto& a : p.symbol.axes)
        single = single && a.size() == 1;

    auto header = std::vector<std::string>{"t"};
    for (const auto& h : coord_header(p.nu, "d"))
        header.push_back(h);
    for (const char* c : {"re", "im", "abs"})
        header.push_back(c);
    Csv csv(header);
    double oracle_err = 0.0;
    double unitarity_err = 0.0;
    bool unitarity_claimed = box;
    for (double t : p.times) {
        std::vector<AxisFactor> f;
        for (const auto& a : p.symbol.axes)
            f.push_back(axis_factor(a, t, reach));
        double mass = 1.0;
        for (std::size_t i = 0; i < f.size(); ++i) {
            double m = 0.0;
            for (int d = -reach; d <= reach; ++d)
                m += std::norm(f[i](d));
            mass *= m;
            // The box only speaks for unitarity if the envelope beyond it is negligible.
            double tail = 0.0;
            for (int d = reach + 1; d <= reach + 400; ++d)
                tail += 2.0 * std::pow(contour_envelope(p.symbol.axes[i], t, d), 2);
            if (!(tail <= 1e-12))
                unitarity_claimed = false;
        }
        unitarity_err = std::max(unitarity_err, std::abs(mass - 1.0));
        for (const auto& d : p.offsets) {
            cplx v{1.0, 0.0};
            cplx oracle{1.0, 0.0};
            for (int i = 0; i < p.nu; ++i) {
                v *= f[static_cast<std::size_t>(i)](d[i]);
                if (single) {
                    const auto& term = p.symbol.axes[static_cast<std::size_t>(i)][0];
                    oracle *= bessel_axis_factor(term.k, term.c, t, d[i]);
                }
            }
            if (single)
                oracle_err = std::max(oracle_err, std::abs(v - oracle));
            std::vector<std::string> row{fmt(t)};
            append_coords(row, d);
            row.push_back(fmt(v.real()));
            row.push_back(fmt(v.imag()));
            row.push_back(fmt(std::abs(v)));
            csv.row(row);
        }
    }
    run.emit("propagator.csv", csv.str());
    if (single)
        run.verdict("bessel_oracle", oracle_err < 1e-8, "max |kernel - Bessel product| " + fmt(oracle_err) +
                                                            " (tolerance 1e-8)");
    if (unitarity_claimed)
        run.verdict("unitarity", unitarity_err < 1e-8,
                    "max |sum |kernel|^2 - 1| " + fmt(unitarity_err) + " (tolerance 1e-8)");
}

void run_decay_check(const ExperimentParams& p, Run& run) {
    if (!p.distances.empty()) {
        const auto rep = verify_offdiagonal_decay(p.symbol, p.t, p.distances);
        Csv csv({"distance", "abs_kernel", "bound", "pass"});
        std::int64_t violations = 0;
        for (const auto& r : rep.rows) {
            csv.row({fmt(r.distance), fmt(r.abs_kernel), fmt(r.bound), fmt(r.pass)});
            violations += r.pass ? 0 : 1;
        }
        run.emit("offdiagonal.csv", csv.str());
        run.emit("offdiagonal.json", dump(json{{"t", p.t},
                                               {"c", jnum(rep.c)},
                                               {"h_prime_sup", jnum(rep.h_prime_sup)},
                                               {"admitted", rep.rows.size()},
                                               {"exponent", 2 * p.nu + 1}}));
        run.verdict("offdiagonal_decay", rep.pass && violations == 0,
                    std::to_string(violations) + " violations over " + std::to_string(rep.rows.size()) +
                        " admissible distances");
    }
    if (p.time_decay) {
        const auto rep = verify_time_decay(p.symbol, p.time_decay->t, p.time_decay->mode, p.time_decay->offset);
        Csv csv({"t", "axis", "m"});
        json axes = json::array();
        for (std::size_t i = 0; i < rep.axes.size(); ++i) {
            const auto& ax = rep.axes[i];
            for (std::size_t j = 0; j < rep.t.size(); ++j)
                csv.row({fmt(rep.t[j]), fmt(static_cast<int>(i)), fmt(ax.m_values[j])});
            axes.push_back(json{{"axis", i},
                                {"slope", jnum(ax.slope)},
                                {"intercept", jnum(ax.intercept)},
                                {"target", jnum(ax.target)},
                                {"pass", ax.pass}});
            run.verdict("time_decay_axis" + std::to_string(i), ax.pass,
                        "slope " + fmt(ax.slope) + " vs target " + fmt(ax.target) + " (tolerance 0.05)");
        }
        run.emit("time_decay.csv", csv.str());
        run.emit("time_decay.json",
                 dump(json{{"mode", p.time_decay->mode == DecayMode::fixed_offset ? "fixed" : "max"},
                           {"offset", p.time_decay->offset},
                           {"axes", axes},
                           {"total_slope", jnum(rep.total_slope)},
                           {"total_target", jnum(rep.total_target)}}));
    }
}

void run_sparseness(const ExperimentParams& p, Run& run) {
    const auto sup = build_support(p, run);
    const auto res = sparseness_integral(p.symbol, *sup.sparse, p.phi, p.t_max, p.weight_gamma, p.samples);
    Csv csv({"t", "c_t"});
    for (std::size_t i = 0; i < res.t.size(); ++i)
        csv.row({fmt(res.t[i]), fmt(res.c[i])});
    run.emit("sparseness.csv", csv.str());
    Csv win({"lo", "hi", "integral", "error", "ratio_to_previous"});
    for (std::size_t i = 0; i < res.windows.size(); ++i) {
        const auto& w = res.windows[i];
        win.row({fmt(w.lo), fmt(w.hi), fmt(w.integral), fmt(w.error), fmt(i > 0 ? res.ratios[i - 1] : kNaN)});
    }
    run.emit("sparseness_windows.csv", win.str());
    const std::size_t tail = std::min<std::size_t>(3, res.ratios.size());
    double worst = 0.0;
    for (std::size_t i = res.ratios.size() - tail; i < res.ratios.size(); ++i)
        worst = std::max(worst, res.ratios[i]);
    run.emit("sparseness.json", dump(json{{"sites", sup.sparse->size()},
                                          {"half_side", sup.sparse->cube.half_side},
                                          {"alpha", sup.sparse->alpha},
                                          {"t_max", p.t_max},
                                          {"gamma", p.weight_gamma ? jnum(*p.weight_gamma) : json(nullptr)},
                                          {"head_bound", jnum(res.head_bound)},
                                          {"tail_bound", jnum(res.tail_bound)},
                                          {"total", jnum(res.total)},
                                          {"converging", res.converging}}));
    run.verdict("window_ratios", res.converging,
                "largest of the last " + std::to_string(tail) + " window ratios " + fmt(worst) + " (must be < 0.9)");
}

void run_cook(const ExperimentParams& p, Run& run) {
    const auto sup = build_support(p, run);
    const auto rows = cook_integrand(p.symbol, sup.sites, *p.disorder, p.phi, p.times, p.samples);
    Csv csv({"t", "bound", "expected_sq", "mean_sq", "stderr_sq", "q10", "median", "q90", "pass"});
    std::int64_t violations = 0;
    for (const auto& r : rows) {
        csv.row({fmt(r.t), fmt(r.bound), fmt(r.expected_sq), fmt(r.mean_sq), fmt(r.stderr_sq), fmt(r.q10),
                 fmt(r.median), fmt(r.q90), fmt(r.pass)});
        violations += r.pass ? 0 : 1;
    }
    run.emit("cook.csv", csv.str());
    run.verdict("median_below_bound", violations == 0,
                std::to_string(violations) + " of " + std::to_string(rows.size()) + " times above the bound");
}

GreenQuery green_query(const ExperimentParams& p, double energy) {
    GreenQuery q;
    q.energy = energy;
    q.epsilon = p.epsilon;
    q.s = p.s;
    q.source = *p.source;
    q.volume = *p.volume;
    q.realizations = p.realizations;
    return q;
}

void emit_moments(const ExperimentParams& p, const std::vector<MomentEstimate>& ests, const SiteSet& support,
                  Run& run) {
    Csv csv({"E", "epsilon", "s", "lambda", "distance", "mean_absG_s", "stderr", "n_samples"});
    auto header = std::vector<std::string>{"E"};
    for (const auto& h : coord_header(p.nu, "m"))
        header.push_back(h);
    for (const char* c : {"distance", "in_support", "mean_absG_s", "stderr", "n_samples"})
        header.push_back(c);
    Csv sites(header);
    for (const auto& est : ests) {
        for (std::size_t d = 0; d < est.per_distance.size(); ++d) {
            const auto& st = est.per_distance[d];
            csv.row({fmt(est.query.energy), fmt(est.query.epsilon), fmt(est.query.s), fmt(est.lambda),
                     fmt(static_cast<int>(d)), fmt(st.mean), fmt(st.standard_error()),
                     fmt(static_cast<long long>(st.count))});
        }
        const Cube& v = est.query.volume;
        for (std::int64_t i = 0; i < v.volume(); ++i) {
            const Site m = v.site_at(i);
            const auto& st = est.per_site[static_cast<std::size_t>(i)];
            std::vector<std::string> row{fmt(est.query.energy)};
            append_coords(row, m);
            row.push_back(fmt(max_distance(m, est.query.source)));
            row.push_back(fmt(contains(support, m)));
            row.push_back(fmt(st.mean));
            row.push_back(fmt(st.standard_error()));
            row.push_back(fmt(static_cast<long long>(st.count)));
            sites.row(row);
        }
    }
    run.emit("moments.csv", csv.str());
    run.emit("moments_sites.csv", sites.str());
}

void run_moments(const ExperimentParams& p, Run& run) {
    const auto sup = build_support(p, run);
    const KernelOperator k = kernel_from_symbol(p.symbol);
    std::vector<MomentEstimate> ests;
    for (double e : p.energies)
        ests.push_back(fractional_moment_estimate(green_query(p, e), k, sup.sites, *p.disorder));
    emit_moments(p, ests, sup.sites, run);
    json summary{{"lambda", p.disorder->lambda}, {"s", p.s}, {"h0_norm_s", k.s_norm(p.s)}};
    if (p.check_am_bound) {
        const double bound = am_uniform_bound(p.disorder->lambda, p.s);
        summary["am_bound"] = bound;
        std::int64_t violations = 0, checked = 0;
        double worst = -std::numeric_limits<double>::infinity();
        if (contains(sup.sites, *p.source))
            for (const auto& est : ests)
                for (std::int64_t i = 0; i < p.volume->volume(); ++i) {
                    if (!contains(sup.sites, p.volume->site_at(i)))
                        continue;
                    const auto& st = est.per_site[static_cast<std::size_t>(i)];
                    const double slack = st.mean - (bound + 2.0 * st.standard_error());
                    worst = std::max(worst, slack);
                    ++checked;
                    violations += slack > 0.0 ? 1 : 0;
                }
        run.verdict("am_uniform_bound", violations == 0 && checked > 0,
                    std::to_string(violations) + " of " + std::to_string(checked) +
                        " sites above bound + 2 stderr; bound " + fmt(bound) + ", worst slack " + fmt(worst));
    }
    run.emit("moments.json", dump(summary));
}

void run_decay_fit(const ExperimentParams& p, Run& run) {
    const auto sup = build_support(p, run);
    const KernelOperator k = kernel_from_symbol(p.symbol);
    const auto dec = decoupling_for(p);
    SiteProfile profile{false, false};
    for (std::int64_t i = 0; i < p.volume->volume(); ++i) {
        const bool in = contains(sup.sites, p.volume->site_at(i));
        profile.on_s = profile.on_s || in;
        profile.off_s = profile.off_s || !in;
    }
    const double energy = p.energies.front();
    const double ks = k_s_factor(k, energy, p.disorder->lambda, p.s, profile, dec);
    json summary{{"energy", energy},
                 {"lambda", p.disorder->lambda},
                 {"s", p.s},
                 {"h0_norm_s", k.s_norm(p.s)},
                 {"decoupling", decoupling_json(dec)},
                 {"lambda_threshold", lambda_threshold(k, p.s, dec)},
                 {"k_s", jnum(ks)},
                 {"log_k_s", jnum(std::log(ks))},
                 {"rate_tolerance", 0.05},
                 {"min_bins", 6},
                 {"reliability", "mean > 10 stderr"}};
    if (const auto cert = localization_certificate(ks, p.nu))
        summary["certificate"] = json{{"geometric_sum", cert->geometric_sum}, {"shell_sum", cert->shell_sum}};
    else
        summary["certificate"] = nullptr;

    const auto est = fractional_moment_estimate(green_query(p, energy), k, sup.sites, *p.disorder);
    emit_moments(p, {est}, sup.sites, run);
    const auto bins = distance_bins(est);
    Csv bcsv({"distance", "mean", "stderr", "count"});
    for (const auto& b : bins)
        bcsv.row({fmt(b.distance), fmt(b.mean), fmt(b.standard_error), fmt(static_cast<long long>(b.count))});
    run.emit("decay_bins.csv", bcsv.str());
    if (!(ks > 0.0) || !std::isfinite(ks))
        throw NumericalError("k_s is not a positive finite number", ks);
    const auto fit = decay_rate_fit(bins, ks);
    summary["rate"] = jnum(fit.rate);
    summary["intercept"] = jnum(fit.intercept);
    summary["distances_used"] = fit.distances_used;
    summary["pass"] = fit.pass;
    run.emit("decay_fit.json", dump(summary));
    run.verdict("decay_rate", fit.pass, "fitted rate " + fmt(fit.rate) + " vs log k_s " + fmt(std::log(ks)) +
                                            " + 0.05 over " + std::to_string(fit.distances_used.size()) + " bins");
}

void run_simon_wolff(const ExperimentParams& p, Run& run) {
    const auto sup = build_support(p, run);
    const KernelOperator k = kernel_from_symbol(p.symbol);
    const double energy = p.energies.front();
    const auto rows = simon_wolff_proxy(green_query(p, energy), k, sup.sites, *p.disorder, p.epsilon_ladder);
    Csv csv({"E", "epsilon", "mean_sum_G2", "stderr", "trend_ratio"});
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& r : rows) {
        csv.row({fmt(energy), fmt(r.epsilon), fmt(r.mean_sum_g2), fmt(r.standard_error), fmt(r.trend_ratio)});
        if (std::isfinite(r.trend_ratio)) {
            lo = std::min(lo, r.trend_ratio);
            hi = std::max(hi, r.trend_ratio);
        }
    }
    run.emit("simon_wolff.csv", csv.str());
    if (p.expect == "ac")
        run.verdict("trend_ac", lo >= 2.0, "smallest trend ratio " + fmt(lo) + " (must be >= 2)");
    else if (p.expect == "pp")
        run.verdict("trend_pp", hi <= 1.2, "largest trend ratio " + fmt(hi) + " (must be <= 1.2)");
}

void run_thresholds(const ExperimentParams& p, Run& run) {
    const KernelOperator k = kernel_from_symbol(p.symbol);
    const auto dec = decoupling_for(p);
    const double energy = p.energies.front();
    const double lambda = p.disorder->lambda;
    Csv csv({"quantity", "value"});
    auto add = [&](const std::string& q, double v) { csv.row({q, fmt(v)}); };
    add("energy", energy);
    add("lambda", lambda);
    add("s", p.s);
    add("h0_norm_1", k.s_norm(1.0));
    add("h0_norm_s", k.s_norm(p.s));
    add("h0_norm_s_pow_s", std::pow(k.s_norm(p.s), p.s));
    add("kappa_hat", dec.kappa_hat);
    add("d_eff", dec.d_eff);
    add("d_proof", dec.d_proof);
    add("eta_re", dec.eta.real());
    add("eta_im", dec.eta.imag());
    add("beta_re", dec.beta.real());
    add("beta_im", dec.beta.imag());
    add("lambda_threshold", lambda_threshold(k, p.s, dec));
    add("coupling_C_on_s", coupling_constant_C(energy, lambda, p.s, true, dec));
    add("coupling_C_off_s", coupling_constant_C(energy, lambda, p.s, false, dec));
    double ks = kNaN;
    if (lambda > 0.0 && energy != 0.0)
        ks = k_s_factor(k, energy, lambda, p.s, {true, true}, dec);
    add("k_s", ks);
    const auto cert = std::isfinite(ks) ? localization_certificate(ks, p.nu) : std::nullopt;
    add("certificate_geometric_sum", cert ? cert->geometric_sum : kNaN);
    add("certificate_shell_sum", cert ? cert->shell_sum : kNaN);
    add("am_uniform_bound", lambda > 0.0 ? am_uniform_bound(lambda, p.s) : kNaN);
    add("neumann_bound", std::abs(energy) > k.s_norm(p.s) ? neumann_fractional_bound(k, energy, p.s) : kNaN);
    run.emit("thresholds.csv", csv.str());
    const bool searched = !p.kappa_hat && !p.d_constant;
    if (searched)
        run.verdict("decoupling_interior", !dec.on_boundary,
                    dec.on_boundary ? "minimizer on the search boundary; enlarge decoupling.radius"
                                    : "minimizer inside the search region");
}

void run_edge_scan(const ExperimentParams& p, Run& run) {
    const auto sup = build_support(p, run);
    const KernelOperator k = kernel_from_symbol(p.symbol);
    const auto scan = mobility_edge_scan(k, sup.sites, *p.disorder, *p.volume, p.realizations, p.s, p.bin_width);
    Csv csv({"bin_lo", "bin_hi", "count", "median_ipr", "r_stat"});
    std::int64_t total = 0;
    for (const auto& b : scan.bins) {
        csv.row({fmt(b.lo), fmt(b.hi), fmt(static_cast<long long>(b.count)), fmt(b.median_ipr), fmt(b.r_stat)});
        total += b.count;
    }
    run.emit("edge_scan.csv", csv.str());
    json side{{"h0_norm_1", scan.h0_norm_1},
              {"h0_norm_s", scan.h0_norm_s},
              {"s", scan.s},
              {"realizations", scan.realizations},
              {"volume", scan.volume},
              {"markers", {-scan.h0_norm_s, -scan.h0_norm_1, scan.h0_norm_1, scan.h0_norm_s}}};
    const std::int64_t expected = scan.volume * scan.realizations;
    run.verdict("level_count", total == expected,
                std::to_string(total) + " binned levels, " + std::to_string(expected) + " expected");
    if (p.contrast) {
        const double threshold = scan.h0_norm_1 + p.contrast->margin;
        const double outside = median_ipr_outside(scan, threshold);
        const double center = median_ipr_center(scan);
        const bool pass = std::isfinite(outside) && std::isfinite(center) && outside >= p.contrast->factor * center;
        side["contrast"] = json{{"threshold", threshold},
                                {"factor", p.contrast->factor},
                                {"median_ipr_outside", jnum(outside)},
                                {"median_ipr_center", jnum(center)}};
        run.verdict("ipr_contrast", pass,
                    "median IPR beyond |E| = " + fmt(threshold) + " is " + fmt(outside) + ", band center " +
                        fmt(center) + ", factor " + fmt(p.contrast->factor));
    }
    run.emit("edge_scan.json", dump(side));
}

void run_theorem2_cube(const ExperimentParams& p, Run& run) {
    const auto sup = build_support(p, run);
    const KernelOperator k = kernel_from_symbol(p.symbol);
    const auto dec = decoupling_for(p);
    const auto cube = theorem2_cube(p.site, p.s, p.gamma, k, dec, sup.sites);
    Csv csv({"radius", "b", "b_infinite", "kappa_hat", "h0_norm_s_pow_s", "gamma", "s"});
    csv.row({fmt(cube.radius), fmt(cube.b), fmt(cube.b_infinite), fmt(dec.kappa_hat), fmt(std::pow(k.s_norm(p.s), p.s)),
             fmt(p.gamma), fmt(p.s)});
    run.emit("theorem2_cube.csv", csv.str());
}

}  // namespace

std::string to_string(ExperimentKind k) {
    for (const auto& kn : kKindNames)
        if (kn.kind == k)
            return kn.name;
    throw std::invalid_argument("unknown experiment kind");
}

std::optional<ExperimentKind> parse_kind(std::string_view name) {
    for (const auto& kn : kKindNames)
        if (name == kn.name)
            return kn.kind;
    return std::nullopt;
}

const std::vector<ExperimentKind>& all_kinds() {
    static const std::vector<ExperimentKind> kinds = [] {
        std::vector<ExperimentKind> v;
        for (const auto& kn : kKindNames)
            v.push_back(kn.kind);
        return v;
    }();
    return kinds;
}

ValidationReport validate_config(std::string_view raw, std::optional<std::uint64_t> seed_override) {
    ValidationReport rep;
    json doc;
    try {
        doc = json::parse(raw.begin(), raw.end());
    } catch (const json::parse_error& e) {
        rep.violations.push_back(std::string("<document>: not valid JSON: ") + e.what());
        return rep;
    }
    Issues issues;
    Block top(&doc, "", issues);
    if (!top.ok()) {
        rep.violations = issues.list;
        return rep;
    }
    ExperimentConfig cfg;
    Context cx{issues, cfg.params, seed_override};
    const auto kind_name = top.string("kind", true);
    std::optional<ExperimentKind> kind;
    if (kind_name) {
        kind = parse_kind(*kind_name);
        if (!kind)
            issues.add("kind", "must be one of " + lower_kind_list());
    }
    if (const auto s = top.seed("seed"))
        cx.seed = *s;
    if (seed_override)
        cx.seed = *seed_override;
    if (const auto o = top.string("output"))
        cfg.output = *o;
    top.string("description");
    if (kind) {
        try {
            schema(*kind, top, cx);
        } catch (const std::exception& e) {
            issues.add("<document>", std::string("unexpected validation failure: ") + e.what());
        }
        top.finish();
    }
    rep.violations = issues.list;
    if (!rep.violations.empty())
        return rep;

    cfg.kind = *kind;
    cfg.seed = cx.seed;
    if (cfg.output.empty())
        cfg.output = "runs/" + *kind_name;
    if (seed_override) {
        doc["seed"] = *seed_override;
        if (doc.contains("disorder") && doc["disorder"].contains("seed"))
            doc["disorder"]["seed"] = *seed_override;
        if (doc.contains("support") && doc["support"].contains("seed"))
            doc["support"]["seed"] = *seed_override;
    }
    cfg.canonical = doc.dump();
    try {
        derive(cfg, rep);
    } catch (const std::exception& e) {
        rep.violations.push_back(std::string("<derived>: ") + e.what());
        return rep;
    }
    rep.config = std::move(cfg);
    return rep;
}

bool RunOutcome::pass() const {
    return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
}

const Artifact* RunOutcome::find(std::string_view name) const {
    for (const auto& a : artifacts)
        if (a.name == name)
            return &a;
    return nullptr;
}

RunOutcome execute(const ExperimentConfig& cfg, const std::function<void(const Artifact&)>& sink) {
    Run run(sink);
    run.emit("config.json", dump(json::parse(cfg.canonical)));
    const auto& p = cfg.params;
    switch (cfg.kind) {
    case ExperimentKind::norms: run_norms(p, run); break;
    case ExperimentKind::kernel: run_kernel(p, run); break;
    case ExperimentKind::propagator: run_propagator(p, run); break;
    case ExperimentKind::decay_check: run_decay_check(p, run); break;
    case ExperimentKind::sparseness: run_sparseness(p, run); break;
    case ExperimentKind::cook: run_cook(p, run); break;
    case ExperimentKind::moments: run_moments(p, run); break;
    case ExperimentKind::decay_fit: run_decay_fit(p, run); break;
    case ExperimentKind::simon_wolff: run_simon_wolff(p, run); break;
    case ExperimentKind::thresholds: run_thresholds(p, run); break;
    case ExperimentKind::edge_scan: run_edge_scan(p, run); break;
    case ExperimentKind::theorem2_cube: run_theorem2_cube(p, run); break;
    }
    return std::move(run.out);
}

std::string RunManifest::to_json() const {
    json files_j = json::array();
    for (const auto& f : files)
        files_j.push_back(json{{"name", f.name}, {"sha256", f.sha256}, {"bytes", f.bytes}});
    json verdicts_j = json::array();
    for (const auto& v : verdicts)
        verdicts_j.push_back(json{{"name", v.name}, {"pass", v.pass}, {"detail", v.detail}});
    json j{{"kind", kind},
           {"config_hash", config_hash},
           {"seed", seed},
           {"version", version},
           {"wall_seconds", wall_seconds},
           {"threads", threads},
           {"files", files_j},
           {"verdicts", verdicts_j},
           {"status", status}};
    if (!failure.empty())
        j["failure"] = failure;
    return dump(j);
}

namespace {

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f)
        throw std::runtime_error("cannot write " + path.string());
}

}  // namespace

RunManifest run_experiment(const ExperimentConfig& cfg, const fs::path& out) {
    const auto start = std::chrono::steady_clock::now();
    RunManifest m;
    m.kind = to_string(cfg.kind);
    m.config_hash = sha256_hex(cfg.canonical);
    m.seed = cfg.seed;
    m.threads = omp_get_max_threads();

    fs::path tmp = out;
    tmp += ".tmp-" + std::to_string(::getpid());
    fs::remove_all(tmp);
    fs::create_directories(tmp);
    auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };
    const auto sink = [&](const Artifact& a) {
        write_file(tmp / a.name, a.content);
        m.files.push_back({a.name, sha256_hex(a.content), a.content.size()});
    };

    RunOutcome outcome;
    try {
        outcome = execute(cfg, sink);
    } catch (const std::exception& e) {
        m.status = "error";
        m.failure = m.kind + " pipeline failed after " +
                    (m.files.empty() ? std::string("no artifacts") : "artifact " + m.files.back().name) + ": " +
                    e.what();
        m.wall_seconds = elapsed();
        const fs::path failed = out / "failed";
        fs::create_directories(out);
        fs::remove_all(failed);
        write_file(tmp / "manifest.json", m.to_json());
        fs::rename(tmp, failed);
        m.directory = failed;
        throw;
    }
    m.verdicts = outcome.verdicts;
    m.status = outcome.pass() ? "pass" : "fail";
    m.wall_seconds = elapsed();
    write_file(tmp / "manifest.json", m.to_json());
    if (!out.parent_path().empty())
        fs::create_directories(out.parent_path());
    fs::remove_all(out);
    fs::rename(tmp, out);
    m.directory = out;
    return m;
}

std::string csv_body(std::string_view csv) {
    const auto nl = csv.find('\n');
    return nl == std::string_view::npos ? std::string() : std::string(csv.substr(nl + 1));
}

}  // namespace sparseloc
