#pragma once

#include "branchsim/digest.hpp"
#include "branchsim/node_id.hpp"
#include "branchsim/sim_core.hpp"

#include <set>
#include <vector>

namespace branchsim
{
    class Store;

    // Inclusive corners.
    struct CellRect
    {
        std::size_t x0 = 0;
        std::size_t y0 = 0;
        std::size_t x1 = 0;
        std::size_t y1 = 0;
    };

    struct ObservationSpec
    {
        enum class Mode
        {
            full_state,
            region_of_interest,
        };
        Mode mode = Mode::full_state;
        CellRect roi; // ignored for full_state

        static ObservationSpec full() { return {}; }
        static ObservationSpec region(CellRect r) { return {Mode::region_of_interest, r}; }
    };

    Bytes observe(const SimulatorSpec &spec, const FieldState &state, const ObservationSpec &obs);

    struct TrajectoryDigest
    {
        NodeId node{};
        std::int64_t t0 = 0;
        std::int64_t t1 = 0;
        std::vector<Digest> per_step;
        Digest combined;
    };

    Digest combine_digests(const std::vector<Digest> &per_step);

    TrajectoryDigest trajectory_digest(const Store &store, NodeId node, std::int64_t t0, std::int64_t t1,
                                       const ObservationSpec &obs);

    struct EquivalenceClass
    {
        Digest representative;
        std::set<NodeId> members;
    };

    // Classes sorted by representative digest.
    std::vector<EquivalenceClass> partition_classes(const Store &store, const std::vector<NodeId> &nodes,
                                                    std::int64_t t0, std::int64_t t1, const ObservationSpec &obs);
}
