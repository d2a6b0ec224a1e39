#pragma once

#include "branchsim/node_id.hpp"
#include "branchsim/sim_core.hpp"
#include "branchsim/snapshot_store.hpp"

#include "json.hpp"

#include <vector>

namespace branchsim
{
    class ScenarioTree;

    struct ProbeQuery
    {
        NodeId node{};
        double x = 0.0; // cell units, 0 <= x <= width - 1
        double y = 0.0;
        std::int64_t step = 0;
    };

    struct Frame
    {
        std::int64_t step = 0;
        FieldState state;
    };

    // Changed values relative to the previous frame, ascending by cell.
    using FrameDelta = StateDelta;

    // Node that holds `step` for `node`'s lineage: the node itself, or the
    // ancestor owning steps before its branch point.
    NodeId resolve_lineage(const Store &store, const ScenarioTree &tree, NodeId node, std::int64_t step);

    double sample_point(const Store &store, const ScenarioTree &tree, const ProbeQuery &q);

    Frame extract_frame(const Store &store, const ScenarioTree &tree, NodeId node, std::int64_t step);

    // Deltas for from_step+1 .. to_step; folding them over
    // extract_frame(from_step) reproduces each later frame.
    std::vector<FrameDelta> frame_deltas(const Store &store, const ScenarioTree &tree, NodeId node,
                                         std::int64_t from_step, std::int64_t to_step);

    nlohmann::json frame_to_json(const Frame &frame);
    nlohmann::json frame_delta_to_json(const FrameDelta &delta);

    // BSIM1 block layout for bulk transfer: tagged, length-prefixed snapshot
    // and delta blocks with cell values encoded as in canonical_bytes.
    Bytes frames_to_blocks(const SimulatorSpec &spec, const Frame &first, const std::vector<FrameDelta> &deltas);
}
