#pragma once

// JSON mirrors of the public configuration types. Not installed.

#include "json.hpp"
#include "qabk/problems.hpp"
#include "qabk/solvers.hpp"

namespace qabk::detail {

nlohmann::json spec_to_json(const GeneratorSpec& spec);
/// Throws nlohmann::json::exception on missing fields and SpecError on bad names.
GeneratorSpec spec_from_json(const nlohmann::json& j);

/// Resolved solver settings, every default materialized.
nlohmann::json solver_config_to_json(const ResolvedSolverConfig& resolved);

}  // namespace qabk::detail
