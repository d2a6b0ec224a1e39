#include "branchsim/scenario_tree.hpp"

#include "branchsim/error.hpp"
#include "branchsim/json_io.hpp"
#include "branchsim/snapshot_store.hpp"

#include <mutex>
#include <set>

namespace branchsim
{
    std::string_view to_string(NodeStatus s) noexcept
    {
        switch (s)
        {
        case NodeStatus::pending: return "pending";
        case NodeStatus::running: return "running";
        case NodeStatus::complete: return "complete";
        case NodeStatus::reused: return "reused";
        case NodeStatus::failed: return "failed";
        }
        return "pending";
    }

    namespace
    {
        NodeStatus status_from_string(std::string_view s)
        {
            for (auto st : {NodeStatus::pending, NodeStatus::running, NodeStatus::complete, NodeStatus::reused,
                            NodeStatus::failed})
            {
                if (to_string(st) == s)
                    return st;
            }
            fail(ErrorCode::InvalidConfig, "unknown node status '" + std::string(s) + "'");
        }
    }

    std::string_view to_string(AnnotationKind k) noexcept
    {
        switch (k)
        {
        case AnnotationKind::descriptive: return "descriptive";
        case AnnotationKind::prescriptive: return "prescriptive";
        case AnnotationKind::evaluative: return "evaluative";
        case AnnotationKind::conditional: return "conditional";
        }
        return "descriptive";
    }

    AnnotationKind annotation_kind_from_string(std::string_view s)
    {
        for (auto k : {AnnotationKind::descriptive, AnnotationKind::prescriptive, AnnotationKind::evaluative,
                       AnnotationKind::conditional})
        {
            if (to_string(k) == s)
                return k;
        }
        fail(ErrorCode::InvalidAnnotation, "unknown annotation kind '" + std::string(s) + "'");
    }

    std::string_view to_string(TreeViolation::Kind k) noexcept
    {
        switch (k)
        {
        case TreeViolation::Kind::no_root: return "no_root";
        case TreeViolation::Kind::multiple_roots: return "multiple_roots";
        case TreeViolation::Kind::cycle: return "cycle";
        case TreeViolation::Kind::missing_parent: return "missing_parent";
        case TreeViolation::Kind::digest_mismatch: return "digest_mismatch";
        case TreeViolation::Kind::window_inconsistent: return "window_inconsistent";
        }
        return "unknown";
    }

    ScenarioTree::ScenarioTree(SimulatorSpec spec) : spec_(spec)
    {
        validate_spec(spec_);
    }

    ScenarioTree::ScenarioTree(const ScenarioTree &other) : spec_(other.spec_)
    {
        std::shared_lock lock(other.mutex_);
        nodes_ = other.nodes_;
        next_id_ = other.next_id_;
    }

    ScenarioNode &ScenarioTree::node_locked(NodeId node)
    {
        auto it = nodes_.find(node);
        if (it == nodes_.end())
        {
            fail(ErrorCode::UnknownNode, "node " + to_string(node));
        }
        return it->second;
    }

    const ScenarioNode &ScenarioTree::node_locked(NodeId node) const
    {
        auto it = nodes_.find(node);
        if (it == nodes_.end())
        {
            fail(ErrorCode::UnknownNode, "node " + to_string(node));
        }
        return it->second;
    }

    ScenarioNode ScenarioTree::create_root(const ParamSet &params, const FieldState &initial_state)
    {
        check_params(spec_, params);
        if (initial_state.size() != spec_.cell_count())
        {
            fail(ErrorCode::InvalidSeed, "initial state does not match grid");
        }
        std::unique_lock lock(mutex_);
        ScenarioNode node;
        node.id = static_cast<NodeId>(next_id_++);
        node.effective_params = params;
        node.start_step = initial_state.step_index;
        node.end_step = initial_state.step_index;
        nodes_.emplace(node.id, node);
        return node;
    }

    BranchResult ScenarioTree::branch_at(NodeId parent_id, std::int64_t branch_step, const ParamOverrides &overrides,
                                         const Store &store)
    {
        // Validation that does not need the tree lock happens first.
        {
            FieldState probe = init_state(spec_, {});
            apply_perturbation(spec_, probe, overrides.perturbation);
        }

        std::unique_lock lock(mutex_);
        const ScenarioNode &parent = node_locked(parent_id);
        if (branch_step > parent.end_step)
        {
            fail(ErrorCode::NotYetSimulated, "node " + to_string(parent_id) + " is simulated through step " +
                                                 std::to_string(parent.end_step) + ", branch requested at " +
                                                 std::to_string(branch_step));
        }
        if (branch_step < parent.start_step)
        {
            fail(ErrorCode::StepNotStored, "branch step precedes the parent's window; branch from an ancestor");
        }
        ParamSet merged = apply_overrides(spec_, parent.effective_params, overrides);
        check_params(spec_, merged);

        const Digest key = overrides_digest(overrides);
        for (const auto &[id, n] : nodes_)
        {
            if (n.parent == parent_id && n.branch_point->branch_step == branch_step &&
                overrides_digest(n.branch_point->overrides) == key)
            {
                return BranchResult{n, true};
            }
        }

        Digest parent_digest;
        try
        {
            parent_digest = store.digest_at(parent_id, branch_step);
        }
        catch (const Error &e)
        {
            if (e.code() == ErrorCode::StepNotStored)
                fail(ErrorCode::NotYetSimulated, e.detail());
            throw;
        }

        ScenarioNode child;
        child.id = static_cast<NodeId>(next_id_++);
        child.parent = parent_id;
        child.branch_point = BranchPoint{branch_step, parent_digest, overrides};
        child.effective_params = std::move(merged);
        child.start_step = branch_step;
        child.end_step = branch_step;
        nodes_.emplace(child.id, child);
        return BranchResult{child, false};
    }

    ScenarioNode ScenarioTree::annotate(NodeId node, AnnotationKind kind, std::string text)
    {
        if (kind == AnnotationKind::conditional && text.empty())
        {
            fail(ErrorCode::InvalidAnnotation, "conditional annotations must state the prescribed action");
        }
        std::unique_lock lock(mutex_);
        ScenarioNode &n = node_locked(node);
        n.annotations.push_back(Annotation{kind, std::move(text)});
        return n;
    }

    ScenarioNode ScenarioTree::get(NodeId node) const
    {
        std::shared_lock lock(mutex_);
        return node_locked(node);
    }

    bool ScenarioTree::contains(NodeId node) const
    {
        std::shared_lock lock(mutex_);
        return nodes_.contains(node);
    }

    std::vector<ScenarioNode> ScenarioTree::nodes() const
    {
        std::shared_lock lock(mutex_);
        std::vector<ScenarioNode> out;
        out.reserve(nodes_.size());
        for (const auto &[id, n] : nodes_)
            out.push_back(n);
        return out;
    }

    std::vector<NodeId> ScenarioTree::children(NodeId node) const
    {
        std::shared_lock lock(mutex_);
        std::vector<NodeId> out;
        for (const auto &[id, n] : nodes_)
        {
            if (n.parent == node)
                out.push_back(id);
        }
        return out;
    }

    std::optional<NodeId> ScenarioTree::root() const
    {
        std::shared_lock lock(mutex_);
        for (const auto &[id, n] : nodes_)
        {
            if (n.is_root())
                return id;
        }
        return std::nullopt;
    }

    std::size_t ScenarioTree::depth(NodeId node) const
    {
        std::shared_lock lock(mutex_);
        std::size_t d = 0;
        const ScenarioNode *n = &node_locked(node);
        while (n->parent && d <= nodes_.size())
        {
            n = &node_locked(*n->parent);
            ++d;
        }
        return d;
    }

    void ScenarioTree::set_status(NodeId node, NodeStatus status, std::string failure)
    {
        std::unique_lock lock(mutex_);
        ScenarioNode &n = node_locked(node);
        n.status = status;
        n.failure = std::move(failure);
    }

    void ScenarioTree::set_end_step(NodeId node, std::int64_t end_step)
    {
        std::unique_lock lock(mutex_);
        node_locked(node).end_step = end_step;
    }

    void ScenarioTree::set_donor(NodeId node, NodeId donor)
    {
        std::unique_lock lock(mutex_);
        node_locked(node).donor = donor;
    }

    nlohmann::json node_to_json(const ScenarioNode &n)
    {
        json j{{"id", raw(n.id)},
               {"parent", n.parent ? json(raw(*n.parent)) : json()},
               {"effective_params", params_to_json(n.effective_params)},
               {"window", json::array({n.start_step, n.end_step})},
               {"status", to_string(n.status)}};
        if (n.branch_point)
        {
            j["branch_point"] = json{{"branch_step", n.branch_point->branch_step},
                                     {"parent_state_digest", n.branch_point->parent_state_digest.hex()},
                                     {"overrides", overrides_to_json(n.branch_point->overrides)}};
        }
        else
        {
            j["branch_point"] = nullptr;
        }
        json annotations = json::array();
        for (const auto &a : n.annotations)
        {
            annotations.push_back(json{{"kind", to_string(a.kind)}, {"text", a.text}});
        }
        j["annotations"] = std::move(annotations);
        if (!n.failure.empty())
            j["failure"] = n.failure;
        if (n.donor)
            j["donor"] = raw(*n.donor);
        return j;
    }

    nlohmann::json ScenarioTree::to_json() const
    {
        std::shared_lock lock(mutex_);
        json nodes = json::array();
        for (const auto &[id, n] : nodes_)
            nodes.push_back(node_to_json(n));
        return json{{"next_id", next_id_}, {"nodes", std::move(nodes)}};
    }

    ScenarioTree ScenarioTree::from_json(const SimulatorSpec &spec, const nlohmann::json &j)
    {
        ScenarioTree tree(spec);
        try
        {
            tree.next_id_ = j.at("next_id").get<std::uint64_t>();
            for (const auto &nj : j.at("nodes"))
            {
                ScenarioNode n;
                n.id = static_cast<NodeId>(nj.at("id").get<std::uint64_t>());
                if (!nj.at("parent").is_null())
                    n.parent = static_cast<NodeId>(nj.at("parent").get<std::uint64_t>());
                if (!nj.at("branch_point").is_null())
                {
                    const auto &bp = nj.at("branch_point");
                    n.branch_point = BranchPoint{bp.at("branch_step").get<std::int64_t>(),
                                                 Digest::from_hex(bp.at("parent_state_digest").get<std::string>()),
                                                 overrides_from_json(bp.at("overrides"))};
                }
                n.effective_params = params_from_json(spec, nj.at("effective_params"));
                n.start_step = nj.at("window").at(0).get<std::int64_t>();
                n.end_step = nj.at("window").at(1).get<std::int64_t>();
                n.status = status_from_string(nj.at("status").get<std::string>());
                for (const auto &a : nj.at("annotations"))
                {
                    n.annotations.push_back(
                        Annotation{annotation_kind_from_string(a.at("kind").get<std::string>()),
                                   a.at("text").get<std::string>()});
                }
                if (nj.contains("failure"))
                    n.failure = nj.at("failure").get<std::string>();
                if (nj.contains("donor"))
                    n.donor = static_cast<NodeId>(nj.at("donor").get<std::uint64_t>());
                tree.nodes_.emplace(n.id, std::move(n));
            }
        }
        catch (const json::exception &e)
        {
            fail(ErrorCode::CorruptStore, std::string("tree manifest unreadable: ") + e.what());
        }
        return tree;
    }

    std::vector<TreeViolation> validate_tree(const ScenarioTree &tree, const Store &store)
    {
        using Kind = TreeViolation::Kind;
        std::vector<TreeViolation> out;
        const auto nodes = tree.nodes();
        std::map<NodeId, const ScenarioNode *> by_id;
        for (const auto &n : nodes)
            by_id[n.id] = &n;

        std::size_t roots = 0;
        for (const auto &n : nodes)
        {
            if (n.is_root())
                ++roots;
        }
        if (roots == 0 && !nodes.empty())
            out.push_back({Kind::no_root, std::nullopt, "tree has no root"});
        if (roots > 1)
            out.push_back({Kind::multiple_roots, std::nullopt, std::to_string(roots) + " roots present"});

        for (const auto &n : nodes)
        {
            // Walk to the root; a walk longer than the node count means a cycle.
            const ScenarioNode *cur = &n;
            std::size_t hops = 0;
            bool broken = false;
            while (cur->parent)
            {
                auto it = by_id.find(*cur->parent);
                if (it == by_id.end())
                {
                    if (cur == &n)
                        out.push_back({Kind::missing_parent, n.id, "parent " + to_string(*n.parent) + " not found"});
                    broken = true;
                    break;
                }
                cur = it->second;
                if (++hops > nodes.size())
                {
                    out.push_back({Kind::cycle, n.id, "parent links form a cycle"});
                    broken = true;
                    break;
                }
            }
            if (n.end_step < n.start_step)
            {
                out.push_back({Kind::window_inconsistent, n.id, "end_step precedes start_step"});
            }
            if (broken || n.is_root())
            {
                if (n.is_root() && n.branch_point)
                    out.push_back({Kind::window_inconsistent, n.id, "root carries a branch point"});
                continue;
            }
            const ScenarioNode &parent = *by_id.at(*n.parent);
            if (!n.branch_point)
            {
                out.push_back({Kind::window_inconsistent, n.id, "non-root node without branch point"});
                continue;
            }
            const auto step = n.branch_point->branch_step;
            if (n.start_step != step || step < parent.start_step || step > parent.end_step)
            {
                out.push_back({Kind::window_inconsistent, n.id, "branch step outside parent window"});
                continue;
            }
            try
            {
                if (store.digest_at(parent.id, step) != n.branch_point->parent_state_digest)
                {
                    out.push_back({Kind::digest_mismatch, n.id,
                                   "branch digest differs from parent's stored digest at step " +
                                       std::to_string(step)});
                }
            }
            catch (const Error &)
            {
                out.push_back({Kind::digest_mismatch, n.id, "parent state at branch step is not stored"});
            }
        }
        return out;
    }
}
