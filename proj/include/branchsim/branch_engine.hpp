#pragma once

#include "branchsim/cost_model.hpp"
#include "branchsim/digest.hpp"
#include "branchsim/scenario_tree.hpp"
#include "branchsim/snapshot_store.hpp"

#include "json.hpp"

#include <mutex>
#include <optional>
#include <set>
#include <unordered_map>

namespace branchsim
{
    // Two runs with equal keys produce bit-identical suffixes. The absolute step
    // is part of the key only for time-variant simulators.
    struct SuffixKey
    {
        SimulatorId simulator = SimulatorId::vesselgrid;
        Digest params;
        Digest state;
        std::optional<std::int64_t> absolute_step;
        std::int64_t horizon = 0;

        Digest digest() const;
    };

    struct MemoEntry
    {
        NodeId node{};
        std::int64_t start = 0;
        std::int64_t length = 0;
    };

    // Concurrent lookup, first-writer-wins registration.
    class MemoTable
    {
    public:
        MemoTable() = default;
        MemoTable(const MemoTable &other);
        MemoTable &operator=(const MemoTable &) = delete;

        std::optional<MemoEntry> lookup(const SuffixKey &key) const;
        bool insert(const SuffixKey &key, const MemoEntry &entry);
        std::size_t size() const;

        nlohmann::json to_json() const;
        static MemoTable from_json(const nlohmann::json &j);

    private:
        mutable std::mutex mutex_;
        std::unordered_map<Digest, MemoEntry> entries_;
    };

    struct RunRequest
    {
        NodeId node{};
        std::int64_t until_step = 0;
        bool incremental = false;
    };

    class BranchEngine
    {
    public:
        BranchEngine(ScenarioTree &tree, Store &store, CostLedger &ledger, MemoTable &memo);

        // Root node plus its initial stored state.
        ScenarioNode create_root(const ParamSet &params, const FieldState &initial);

        BranchResult branch(NodeId parent, std::int64_t branch_step, const ParamOverrides &overrides);

        // Runs a node forward. A suffix-key hit links the donor's stored suffix
        // instead of stepping. Re-running to an already covered step is a no-op.
        ScenarioNode run(const RunRequest &request);

        // Reconstructs the parent's state at the branch step (delta applications
        // are counted as replay), verifies it against the branch digest, applies
        // any perturbation and opens the child's track.
        FieldState materialize_branch_start(NodeId child);

        // Runs every pending node to until_step. Nodes are scheduled parents
        // first; results do not depend on max_workers.
        void run_tree(std::int64_t until_step, std::size_t max_workers);

        // Runs each listed node to its own target step with the same
        // scheduling as run_tree. Failures are recorded on the nodes.
        void run_targets(const std::map<NodeId, std::int64_t> &targets, std::size_t max_workers);

        // Re-runs [from, to] of `node` as a new branch with changed parameters,
        // stepping incrementally from the cells the change touches.
        ScenarioNode reflect_update(NodeId node, const ParamOverrides &overrides, std::int64_t from,
                                    std::int64_t to);

        SuffixKey suffix_key(const ScenarioNode &node, std::int64_t from_step, std::int64_t horizon) const;

        // Cells changed by the step that produced `step` on this node's
        // trajectory, widened by parameter changes at a branch start.
        DirtySet dirty_into(NodeId node, std::int64_t step) const;

    private:
        ScenarioNode run_claimed(const RunRequest &request);
        void claim(NodeId node);
        void release(NodeId node);

        ScenarioTree &tree_;
        Store &store_;
        CostLedger &ledger_;
        MemoTable &memo_;

        std::mutex running_mutex_;
        std::set<NodeId> running_;
    };
}
