#include "sparseloc/presets.hpp"

#include <stdexcept>

namespace sparseloc {

namespace {

// epsilon 0.1 / 2^k, k = 0..10; every entry is exactly half the previous double.
constexpr const char* kHalvingLadder =
    "[0.1, 0.05, 0.025, 0.0125, 0.00625, 0.003125, 0.0015625, 0.00078125, 0.000390625, 0.0001953125, "
    "0.00009765625]";

std::vector<Preset> build() {
    const std::string ladder = kHalvingLadder;
    return {
        {"norms", 1, R"({"kind": "norms", "nu": 2, "s_grid": [0.3, 0.5, 0.9]})"},
        {"propagator", 3, R"({"kind": "propagator", "nu": 2, "times": [0.5, 1, 5, 20], "max_distance": 30})"},
        {"time_decay_max", 4,
         R"({"kind": "decay_check", "nu": 1,
             "time_decay": {"t_min": 50, "t_max": 800, "points": 13, "mode": "max"}})"},
        {"time_decay_fixed", 4,
         R"({"kind": "decay_check", "nu": 1,
             "time_decay": {"t_min": 50, "t_max": 800, "points": 13, "mode": "fixed", "offset": 0}})"},
        {"offdiagonal", 5, R"({"kind": "decay_check", "nu": 1, "t": 5, "distances": {"min": 1, "max": 200}})"},
        {"sparseness", 7,
         R"({"kind": "sparseness", "nu": 5, "seed": 7, "t_max": 64,
             "support": {"type": "sparse", "alpha": 0.25, "generator": "bernoulli_thinned"}})"},
        {"sparseness_weighted", 7,
         R"({"kind": "sparseness", "nu": 5, "seed": 7, "t_max": 64, "weight": {"gamma": 0.25},
             "support": {"type": "sparse", "alpha": 0.25, "generator": "bernoulli_thinned"}})"},
        {"am_bound", 8,
         R"({"kind": "moments", "nu": 1, "seed": 11, "half_side": 200,
             "disorder": {"law": "uniform", "params": [-1, 1], "lambda": 30},
             "energies": [3, 5], "epsilon": 0.001, "s": 0.5, "realizations": 200, "check_am_bound": true})"},
        {"decay_fit", 9,
         R"({"kind": "decay_fit", "nu": 1, "seed": 13, "half_side": 200,
             "disorder": {"law": "uniform", "params": [-1, 1], "lambda": 30},
             "energy": 5, "epsilon": 0.001, "s": 0.5, "realizations": 4000})"},
        {"simon_wolff_ac", 10,
         R"({"kind": "simon_wolff", "nu": 1, "seed": 17, "half_side": 200,
             "disorder": {"law": "uniform", "params": [-1, 1], "lambda": 0},
             "energy": 0, "epsilon_ladder": )" + ladder + R"(, "realizations": 100, "expect": "ac"})"},
        {"simon_wolff_pp", 10,
         R"({"kind": "simon_wolff", "nu": 1, "seed": 17, "half_side": 200,
             "disorder": {"law": "uniform", "params": [-1, 1], "lambda": 30},
             "energy": 31.5, "epsilon_ladder": )" + ladder + R"(, "realizations": 100, "expect": "pp"})"},
        {"theorem2_cube", 11,
         R"({"kind": "theorem2_cube", "nu": 1, "s": 0.5, "gamma": 1, "half_side": 10,
             "decoupling": {"kappa_hat": 1}})"},
        {"edge_scan", 12,
         R"({"kind": "edge_scan", "nu": 1, "seed": 19, "half_side": 200,
             "support": {"type": "sparse", "alpha": 0.5, "generator": "bernoulli_thinned"},
             "disorder": {"law": "uniform", "params": [-1, 1], "lambda": 1, "weight": {"gamma": 0.5}},
             "realizations": 20, "s": 0.5, "contrast": {"margin": 0.5, "factor": 10}})"},
        {"moments_desk", 0,
         R"({"kind": "moments", "nu": 1, "seed": 5, "half_side": 20,
             "disorder": {"law": "uniform", "params": [-1, 1], "lambda": 5},
             "energy": 3, "epsilon": 0.01, "s": 0.5, "realizations": 16})"},
    };
}

}  // namespace

const std::vector<Preset>& presets() {
    static const std::vector<Preset> all = build();
    return all;
}

const Preset& preset(const std::string& name) {
    for (const auto& p : presets())
        if (p.name == name)
            return p;
    throw std::invalid_argument("unknown preset " + name);
}

}  // namespace sparseloc
