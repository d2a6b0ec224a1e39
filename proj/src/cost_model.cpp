#include "branchsim/cost_model.hpp"

#include "branchsim/error.hpp"
#include "branchsim/scenario_tree.hpp"

namespace branchsim
{
    CostLedger::CostLedger(const CostLedger &other)
    {
        std::lock_guard lock(other.mutex_);
        counters_ = other.counters_;
    }

    void CostLedger::register_node(NodeId node)
    {
        std::lock_guard lock(mutex_);
        counters_.try_emplace(node);
    }

    bool CostLedger::contains(NodeId node) const
    {
        std::lock_guard lock(mutex_);
        return counters_.contains(node);
    }

    void CostLedger::record_steps(NodeId node, StepKind kind, std::uint64_t count)
    {
        std::lock_guard lock(mutex_);
        auto it = counters_.find(node);
        if (it == counters_.end())
        {
            fail(ErrorCode::UnknownNode, "ledger has no node " + to_string(node));
        }
        switch (kind)
        {
        case StepKind::fresh: it->second.fresh += count; break;
        case StepKind::replay: it->second.replay += count; break;
        case StepKind::reused: it->second.reused += count; break;
        }
    }

    StepCounters CostLedger::counters(NodeId node) const
    {
        std::lock_guard lock(mutex_);
        auto it = counters_.find(node);
        if (it == counters_.end())
        {
            fail(ErrorCode::UnknownNode, "ledger has no node " + to_string(node));
        }
        return it->second;
    }

    std::map<NodeId, StepCounters> CostLedger::snapshot() const
    {
        std::lock_guard lock(mutex_);
        return counters_;
    }

    nlohmann::json CostLedger::to_json() const
    {
        nlohmann::json out = nlohmann::json::array();
        for (const auto &[id, c] : snapshot())
        {
            out.push_back({{"id", raw(id)}, {"fresh", c.fresh}, {"replay", c.replay}, {"reused", c.reused}});
        }
        return out;
    }

    CostLedger CostLedger::from_json(const nlohmann::json &j)
    {
        CostLedger ledger;
        try
        {
            for (const auto &e : j)
            {
                ledger.counters_[static_cast<NodeId>(e.at("id").get<std::uint64_t>())] =
                    StepCounters{e.at("fresh").get<std::uint64_t>(), e.at("replay").get<std::uint64_t>(),
                                 e.at("reused").get<std::uint64_t>()};
            }
        }
        catch (const nlohmann::json::exception &e)
        {
            fail(ErrorCode::CorruptStore, std::string("ledger unreadable: ") + e.what());
        }
        return ledger;
    }

    namespace
    {
        void check_counts(std::int64_t prefix_classes, std::int64_t suffix_classes)
        {
            if (prefix_classes < 1 || suffix_classes < 1)
            {
                fail(ErrorCode::InvalidClassCount, "class counts must be at least 1");
            }
        }
    }

    bool theorem71_no_gain(std::int64_t prefix_classes, std::int64_t suffix_classes)
    {
        check_counts(prefix_classes, suffix_classes);
        return prefix_classes == 1 && suffix_classes == 1;
    }

    std::string_view to_string(BranchVerdict v) noexcept
    {
        switch (v)
        {
        case BranchVerdict::BranchSavesTime_CaseA: return "BranchSavesTime_CaseA";
        case BranchVerdict::BranchSavesTime_CaseB: return "BranchSavesTime_CaseB";
        case BranchVerdict::NoGain: return "NoGain";
        }
        return "NoGain";
    }

    BranchAdvice theorem72_advice(std::int64_t prefix_classes, std::int64_t suffix_classes)
    {
        check_counts(prefix_classes, suffix_classes);
        BranchAdvice advice{BranchVerdict::NoGain, prefix_classes, suffix_classes};
        if (suffix_classes >= 2)
            advice.verdict = BranchVerdict::BranchSavesTime_CaseA;
        else if (prefix_classes >= 2)
            advice.verdict = BranchVerdict::BranchSavesTime_CaseB;
        return advice;
    }

    nlohmann::json SavingsReport::to_json() const
    {
        nlohmann::json per_node = nlohmann::json::array();
        for (const auto &n : nodes)
        {
            per_node.push_back({{"id", raw(n.id)},
                                {"fresh", n.counters.fresh},
                                {"replay", n.counters.replay},
                                {"reused", n.counters.reused}});
        }
        return {{"steps_linear", steps_linear},
                {"steps_branching", steps_branching},
                {"ratio", ratio},
                {"nodes", std::move(per_node)}};
    }

    SavingsReport savings_report(const ScenarioTree &tree, const CostLedger &ledger)
    {
        const auto nodes = tree.nodes();
        const auto root = tree.root();
        if (!root)
        {
            fail(ErrorCode::TreeIncomplete, "tree has no root");
        }
        const std::int64_t t0 = tree.get(*root).start_step;

        std::map<NodeId, std::size_t> child_count;
        for (const auto &n : nodes)
        {
            if (n.parent)
                ++child_count[*n.parent];
        }

        SavingsReport report;
        for (const auto &n : nodes)
        {
            if (child_count[n.id] != 0)
                continue;
            if (n.status != NodeStatus::complete && n.status != NodeStatus::reused)
            {
                fail(ErrorCode::TreeIncomplete, "leaf " + to_string(n.id) + " is " + std::string(to_string(n.status)));
            }
            report.steps_linear += static_cast<std::uint64_t>(n.end_step - t0);
        }
        for (const auto &[id, c] : ledger.snapshot())
        {
            if (!tree.contains(id))
                continue;
            report.steps_branching += c.fresh + c.replay;
            report.nodes.push_back(NodeCost{id, c});
        }
        if (report.steps_linear == 0)
        {
            fail(ErrorCode::TreeIncomplete, "no simulated steps to compare");
        }
        report.ratio = static_cast<double>(report.steps_branching) / static_cast<double>(report.steps_linear);
        return report;
    }
}
