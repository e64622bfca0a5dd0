#pragma once

#include <string>
#include <vector>

namespace sparseloc {

/// A named, seed-pinned experiment config. `criterion` ties it to an acceptance check.
struct Preset {
    std::string name;
    int criterion = 0;
    std::string config;  // JSON text
};

/// The suite run by `sparseloc verify` and by the acceptance binary.
const std::vector<Preset>& presets();
const Preset& preset(const std::string& name);

}  // namespace sparseloc
