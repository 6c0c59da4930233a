#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "ispace/space_def.hpp"

namespace ispace {

// Renders a definition back to surface syntax. Parsing the result yields a
// structurally equal definition (round-trip stability; comments are not kept).
std::string pretty_print(const SpaceDefinition& def);

// Stable structural dump, used for golden comparisons. Key order is fixed.
nlohmann::ordered_json to_json(const SpaceDefinition& def);

}  // namespace ispace
