#pragma once

#include "branchsim/digest.hpp"
#include "branchsim/sim_core.hpp"

#include "json.hpp"

namespace branchsim
{
    using json = nlohmann::json;

    json spec_to_json(const SimulatorSpec &spec);
    SimulatorSpec spec_from_json(const json &j);

    json params_to_json(const ParamSet &params);
    ParamSet params_from_json(const SimulatorSpec &spec, const json &j);

    json overrides_to_json(const ParamOverrides &overrides);
    ParamOverrides overrides_from_json(const json &j);

    std::string_view simulator_name(SimulatorId id) noexcept;

    // Parameter sets and overrides are digested through their JSON form;
    // object keys are emitted sorted so the text is canonical.
    Digest params_digest(const ParamSet &params);
    Digest overrides_digest(const ParamOverrides &overrides);
}
