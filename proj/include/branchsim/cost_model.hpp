#pragma once

#include "branchsim/node_id.hpp"

#include "json.hpp"

#include <cstdint>
#include <map>
#include <mutex>
#include <vector>

namespace branchsim
{
    class ScenarioTree;

    enum class StepKind
    {
        fresh,  // solver step computed
        replay, // step re-executed (or delta re-applied) to reach a branch point
        reused, // step satisfied by a stored donor suffix
    };

    struct StepCounters
    {
        std::uint64_t fresh = 0;
        std::uint64_t replay = 0;
        std::uint64_t reused = 0;

        bool operator==(const StepCounters &) const = default;
    };

    // Per-node step accounting. Counters only grow; each update is atomic.
    class CostLedger
    {
    public:
        CostLedger() = default;
        CostLedger(const CostLedger &other);
        CostLedger &operator=(const CostLedger &) = delete;

        void register_node(NodeId node);
        bool contains(NodeId node) const;

        void record_step(NodeId node, StepKind kind) { record_steps(node, kind, 1); }
        void record_steps(NodeId node, StepKind kind, std::uint64_t count);

        StepCounters counters(NodeId node) const;
        std::map<NodeId, StepCounters> snapshot() const;

        nlohmann::json to_json() const;
        static CostLedger from_json(const nlohmann::json &j);

    private:
        mutable std::mutex mutex_;
        std::map<NodeId, StepCounters> counters_;
    };

    bool theorem71_no_gain(std::int64_t prefix_classes, std::int64_t suffix_classes);

    enum class BranchVerdict
    {
        BranchSavesTime_CaseA, // the suffix splits into >= 2 classes
        BranchSavesTime_CaseB, // one suffix class, >= 2 prefix classes
        NoGain,
    };

    std::string_view to_string(BranchVerdict v) noexcept;

    struct BranchAdvice
    {
        BranchVerdict verdict = BranchVerdict::NoGain;
        std::int64_t prefix_classes = 1;
        std::int64_t suffix_classes = 1;
    };

    BranchAdvice theorem72_advice(std::int64_t prefix_classes, std::int64_t suffix_classes);

    struct NodeCost
    {
        NodeId id{};
        StepCounters counters;
    };

    struct SavingsReport
    {
        std::uint64_t steps_linear = 0;
        std::uint64_t steps_branching = 0;
        double ratio = 0.0;
        std::vector<NodeCost> nodes;

        nlohmann::json to_json() const;
    };

    // Linear baseline: every leaf re-simulated from the root's start step.
    // Branching: fresh + replay steps actually spent across the tree.
    SavingsReport savings_report(const ScenarioTree &tree, const CostLedger &ledger);
}
