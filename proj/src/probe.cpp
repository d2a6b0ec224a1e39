#include "branchsim/probe.hpp"

#include "branchsim/error.hpp"
#include "branchsim/scenario_tree.hpp"

#include <bit>
#include <cmath>

namespace branchsim
{
    namespace
    {
        bool owns_step(const Store &store, NodeId node, std::int64_t step)
        {
            const auto w = store.window(node);
            return w && step >= w->first && step <= w->second;
        }
    }

    NodeId resolve_lineage(const Store &store, const ScenarioTree &tree, NodeId node, std::int64_t step)
    {
        NodeId current = node;
        for (;;)
        {
            if (owns_step(store, current, step))
                return current;
            const ScenarioNode n = tree.get(current);
            if (!n.parent)
                break;
            const auto &bp = *n.branch_point;
            // The branch step itself belongs to the child once it is
            // materialized; before that an unperturbed child shares the
            // parent's state there.
            const bool before_branch = step < bp.branch_step ||
                                       (step == bp.branch_step && bp.overrides.perturbation.empty());
            if (!before_branch)
                break;
            current = *n.parent;
        }
        fail(ErrorCode::StepNotStored,
             "step " + std::to_string(step) + " is not stored for node " + to_string(node) + " or its lineage");
    }

    double sample_point(const Store &store, const ScenarioTree &tree, const ProbeQuery &q)
    {
        const auto &spec = store.spec();
        const double max_x = static_cast<double>(spec.width - 1);
        const double max_y = static_cast<double>(spec.height - 1);
        if (!std::isfinite(q.x) || !std::isfinite(q.y) || q.x < 0.0 || q.y < 0.0 || q.x > max_x || q.y > max_y)
        {
            fail(ErrorCode::InvalidProbe, "probe position outside the grid");
        }
        if (!tree.contains(q.node))
        {
            fail(ErrorCode::UnknownNode, "node " + to_string(q.node));
        }
        const FieldState state = store.state_at(resolve_lineage(store, tree, q.node, q.step), q.step);

        const auto x0 = static_cast<std::size_t>(std::floor(q.x));
        const auto y0 = static_cast<std::size_t>(std::floor(q.y));
        const std::size_t x1 = std::min(x0 + 1, spec.width - 1);
        const std::size_t y1 = std::min(y0 + 1, spec.height - 1);
        const double fx = q.x - static_cast<double>(x0);
        const double fy = q.y - static_cast<double>(y0);
        auto at = [&](std::size_t x, std::size_t y) { return state.value(y * spec.width + x); };

        // std::lerp is exact at the endpoints and monotonic, which keeps the
        // result inside the corner range and exact on grid points.
        const double top = std::lerp(at(x0, y0), at(x1, y0), fx);
        const double bottom = std::lerp(at(x0, y1), at(x1, y1), fx);
        return std::lerp(top, bottom, fy);
    }

    Frame extract_frame(const Store &store, const ScenarioTree &tree, NodeId node, std::int64_t step)
    {
        if (!tree.contains(node))
        {
            fail(ErrorCode::UnknownNode, "node " + to_string(node));
        }
        return Frame{step, store.state_at(resolve_lineage(store, tree, node, step), step)};
    }

    std::vector<FrameDelta> frame_deltas(const Store &store, const ScenarioTree &tree, NodeId node,
                                         std::int64_t from_step, std::int64_t to_step)
    {
        if (from_step >= to_step)
        {
            fail(ErrorCode::InvalidRange, "from_step must precede to_step");
        }
        if (!tree.contains(node))
        {
            fail(ErrorCode::UnknownNode, "node " + to_string(node));
        }
        std::vector<FrameDelta> out;
        out.reserve(static_cast<std::size_t>(to_step - from_step));
        NodeId prev_owner = resolve_lineage(store, tree, node, from_step);
        for (std::int64_t s = from_step + 1; s <= to_step; ++s)
        {
            const NodeId owner = resolve_lineage(store, tree, node, s);
            if (owner == prev_owner && s > store.window(owner)->first)
            {
                // Stored delta: only changed values are loaded.
                out.push_back(store.delta_at(owner, s));
            }
            else
            {
                // Lineage switch at a branch start: diff the two frames.
                out.push_back(make_delta(store.state_at(prev_owner, s - 1), store.state_at(owner, s)));
            }
            prev_owner = owner;
        }
        return out;
    }

    nlohmann::json frame_to_json(const Frame &frame)
    {
        nlohmann::json cells = nlohmann::json::array();
        for (CellIndex i = 0; i < frame.state.size(); ++i)
            cells.push_back(frame.state.value(i));
        return {{"step", frame.step}, {"cells", std::move(cells)}};
    }

    nlohmann::json frame_delta_to_json(const FrameDelta &delta)
    {
        nlohmann::json entries = nlohmann::json::array();
        for (const auto &e : delta.entries)
            entries.push_back(nlohmann::json::array({e.index, e.value}));
        return {{"step", delta.step_index}, {"entries", std::move(entries)}};
    }

    Bytes frames_to_blocks(const SimulatorSpec &spec, const Frame &first, const std::vector<FrameDelta> &deltas)
    {
        Bytes out = {'B', 'S', 'I', 'M', '1', '\0',
                     static_cast<std::uint8_t>(store_format_version & 0xff),
                     static_cast<std::uint8_t>(store_format_version >> 8)};
        auto block = [&out](std::uint8_t tag, const Bytes &payload)
        {
            out.push_back(tag);
            write_le64(out, payload.size());
            out.insert(out.end(), payload.begin(), payload.end());
        };
        Bytes snap;
        write_le64(snap, static_cast<std::uint64_t>(first.step));
        const Bytes cells = canonical_bytes(spec, first.state);
        snap.insert(snap.end(), cells.begin(), cells.end());
        block(1, snap);
        for (const auto &d : deltas)
        {
            Bytes payload;
            write_le64(payload, static_cast<std::uint64_t>(d.step_index));
            write_le64(payload, d.entries.size());
            for (const auto &e : d.entries)
            {
                write_le64(payload, e.index);
                if (spec.simulator == SimulatorId::vesselgrid)
                    write_le64(payload, std::bit_cast<std::uint64_t>(e.value));
                else
                    payload.push_back(static_cast<std::uint8_t>(e.value));
            }
            block(2, payload);
        }
        return out;
    }
}
