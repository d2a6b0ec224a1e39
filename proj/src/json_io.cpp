#include "branchsim/json_io.hpp"

#include "branchsim/error.hpp"

#include <set>

namespace branchsim
{
    namespace
    {
        void reject_unknown_keys(const json &j, const std::set<std::string> &allowed, const char *what)
        {
            if (!j.is_object())
            {
                fail(ErrorCode::InvalidConfig, std::string(what) + " must be a JSON object");
            }
            for (const auto &item : j.items())
            {
                if (!allowed.contains(item.key()))
                {
                    fail(ErrorCode::InvalidConfig, std::string("unknown key '") + item.key() + "' in " + what);
                }
            }
        }

        template <typename T>
        T get_as(const json &j, const char *key)
        {
            try
            {
                return j.at(key).get<T>();
            }
            catch (const json::exception &e)
            {
                fail(ErrorCode::InvalidConfig, std::string("field '") + key + "': " + e.what());
            }
        }
    }

    std::string_view simulator_name(SimulatorId id) noexcept
    {
        return id == SimulatorId::vesselgrid ? "vesselgrid" : "maxca";
    }

    json spec_to_json(const SimulatorSpec &spec)
    {
        return json{{"simulator", simulator_name(spec.simulator)},
                    {"width", spec.width},
                    {"height", spec.height},
                    {"cell_size_h", spec.cell_size_h},
                    {"time_invariant", spec.time_invariant()}};
    }

    SimulatorSpec spec_from_json(const json &j)
    {
        reject_unknown_keys(j, {"simulator", "width", "height", "cell_size_h", "time_invariant"}, "spec");
        SimulatorSpec spec;
        const auto name = get_as<std::string>(j, "simulator");
        if (name == "vesselgrid")
            spec.simulator = SimulatorId::vesselgrid;
        else if (name == "maxca")
            spec.simulator = SimulatorId::maxca;
        else
            fail(ErrorCode::InvalidConfig, "unknown simulator '" + name + "'");
        spec.width = get_as<std::size_t>(j, "width");
        spec.height = get_as<std::size_t>(j, "height");
        if (j.contains("cell_size_h"))
            spec.cell_size_h = get_as<double>(j, "cell_size_h");
        if (j.contains("time_invariant") && get_as<bool>(j, "time_invariant") != spec.time_invariant())
        {
            fail(ErrorCode::InvalidConfig, "time_invariant contradicts the simulator's declaration");
        }
        validate_spec(spec);
        return spec;
    }

    json params_to_json(const ParamSet &params)
    {
        if (std::holds_alternative<MaxcaParams>(params))
        {
            return json::object();
        }
        const auto &p = std::get<VesselParams>(params);
        return json{{"diffusion_D", p.diffusion},   {"velocity_vx", p.velocity_x}, {"velocity_vy", p.velocity_y},
                    {"dt", p.dt},                   {"source_cells", p.source_cells},
                    {"source_amp", p.source_amp},   {"source_period", p.source_period}};
    }

    ParamSet params_from_json(const SimulatorSpec &spec, const json &j)
    {
        if (spec.simulator == SimulatorId::maxca)
        {
            reject_unknown_keys(j, {}, "maxca params");
            return MaxcaParams{};
        }
        reject_unknown_keys(
            j, {"diffusion_D", "velocity_vx", "velocity_vy", "dt", "source_cells", "source_amp", "source_period"},
            "params");
        ParamOverrides as_overrides = overrides_from_json(j);
        return apply_overrides(spec, VesselParams{}, as_overrides);
    }

    json overrides_to_json(const ParamOverrides &o)
    {
        json j = json::object();
        if (o.diffusion)
            j["diffusion_D"] = *o.diffusion;
        if (o.velocity_x)
            j["velocity_vx"] = *o.velocity_x;
        if (o.velocity_y)
            j["velocity_vy"] = *o.velocity_y;
        if (o.dt)
            j["dt"] = *o.dt;
        if (o.source_cells)
            j["source_cells"] = *o.source_cells;
        if (o.source_amp)
            j["source_amp"] = *o.source_amp;
        if (o.source_period)
            j["source_period"] = *o.source_period;
        if (!o.perturbation.empty())
        {
            json cells = json::array();
            for (const auto &[i, v] : o.perturbation)
            {
                cells.push_back(json::array({i, v}));
            }
            j["perturbation"] = std::move(cells);
        }
        return j;
    }

    ParamOverrides overrides_from_json(const json &j)
    {
        if (j.is_null())
        {
            return {};
        }
        reject_unknown_keys(j,
                            {"diffusion_D", "velocity_vx", "velocity_vy", "dt", "source_cells", "source_amp",
                             "source_period", "perturbation"},
                            "overrides");
        ParamOverrides o;
        if (j.contains("diffusion_D"))
            o.diffusion = get_as<double>(j, "diffusion_D");
        if (j.contains("velocity_vx"))
            o.velocity_x = get_as<double>(j, "velocity_vx");
        if (j.contains("velocity_vy"))
            o.velocity_y = get_as<double>(j, "velocity_vy");
        if (j.contains("dt"))
            o.dt = get_as<double>(j, "dt");
        if (j.contains("source_cells"))
            o.source_cells = get_as<std::vector<CellIndex>>(j, "source_cells");
        if (j.contains("source_amp"))
            o.source_amp = get_as<double>(j, "source_amp");
        if (j.contains("source_period"))
            o.source_period = get_as<std::int64_t>(j, "source_period");
        if (j.contains("perturbation"))
        {
            for (const auto &[i, v] : get_as<std::vector<std::pair<CellIndex, double>>>(j, "perturbation"))
            {
                o.perturbation[i] = v;
            }
        }
        return o;
    }

    Digest params_digest(const ParamSet &params)
    {
        return sha256(params_to_json(params).dump());
    }

    Digest overrides_digest(const ParamOverrides &overrides)
    {
        return sha256(overrides_to_json(overrides).dump());
    }
}
