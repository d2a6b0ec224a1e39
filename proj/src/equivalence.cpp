#include "branchsim/equivalence.hpp"

#include "branchsim/error.hpp"
#include "branchsim/snapshot_store.hpp"

#include <map>

namespace branchsim
{
    namespace
    {
        void check_roi(const SimulatorSpec &spec, const ObservationSpec &obs)
        {
            if (obs.mode == ObservationSpec::Mode::full_state)
                return;
            const auto &r = obs.roi;
            if (r.x0 > r.x1 || r.y0 > r.y1 || r.x1 >= spec.width || r.y1 >= spec.height)
            {
                fail(ErrorCode::InvalidObservation, "region of interest outside the grid");
            }
        }
    }

    Bytes observe(const SimulatorSpec &spec, const FieldState &state, const ObservationSpec &obs)
    {
        check_roi(spec, obs);
        if (obs.mode == ObservationSpec::Mode::full_state)
        {
            return canonical_bytes(spec, state);
        }
        Bytes out;
        const auto &r = obs.roi;
        out.reserve((r.x1 - r.x0 + 1) * (r.y1 - r.y0 + 1) * spec.value_size());
        for (std::size_t y = r.y0; y <= r.y1; ++y)
        {
            for (std::size_t x = r.x0; x <= r.x1; ++x)
            {
                append_cell_bytes(spec, state, y * spec.width + x, out);
            }
        }
        return out;
    }

    Digest combine_digests(const std::vector<Digest> &per_step)
    {
        Hasher h;
        for (const auto &d : per_step)
            h.update(d);
        return h.finish();
    }

    TrajectoryDigest trajectory_digest(const Store &store, NodeId node, std::int64_t t0, std::int64_t t1,
                                       const ObservationSpec &obs)
    {
        if (t0 > t1)
        {
            fail(ErrorCode::InvalidRange, "interval start after end");
        }
        check_roi(store.spec(), obs);
        TrajectoryDigest out{node, t0, t1, {}, {}};
        out.per_step.reserve(static_cast<std::size_t>(t1 - t0 + 1));
        if (obs.mode == ObservationSpec::Mode::full_state)
        {
            // Stored digests already cover canonical bytes.
            for (std::int64_t s = t0; s <= t1; ++s)
                out.per_step.push_back(store.digest_at(node, s));
        }
        else
        {
            store.for_each_state(node, t0, t1, [&](const FieldState &state)
                                 { out.per_step.push_back(sha256(observe(store.spec(), state, obs))); });
        }
        out.combined = combine_digests(out.per_step);
        return out;
    }

    std::vector<EquivalenceClass> partition_classes(const Store &store, const std::vector<NodeId> &nodes,
                                                    std::int64_t t0, std::int64_t t1, const ObservationSpec &obs)
    {
        std::map<Digest, std::set<NodeId>> groups;
        for (NodeId node : nodes)
        {
            groups[trajectory_digest(store, node, t0, t1, obs).combined].insert(node);
        }
        std::vector<EquivalenceClass> out;
        for (auto &[digest, members] : groups)
        {
            out.push_back(EquivalenceClass{digest, std::move(members)});
        }
        return out;
    }
}
