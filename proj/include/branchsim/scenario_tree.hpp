#pragma once

#include "branchsim/digest.hpp"
#include "branchsim/node_id.hpp"
#include "branchsim/sim_core.hpp"

#include "json.hpp"

#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace branchsim
{
    class Store;

    enum class NodeStatus
    {
        pending,
        running,
        complete,
        reused,
        failed,
    };

    enum class AnnotationKind
    {
        descriptive,
        prescriptive,
        evaluative,
        // evaluative + prescriptive: what may happen and the action to take
        conditional,
    };

    std::string_view to_string(NodeStatus s) noexcept;
    std::string_view to_string(AnnotationKind k) noexcept;
    AnnotationKind annotation_kind_from_string(std::string_view s);

    struct Annotation
    {
        AnnotationKind kind = AnnotationKind::descriptive;
        std::string text;

        bool operator==(const Annotation &) const = default;
    };

    struct BranchPoint
    {
        std::int64_t branch_step = 0;
        Digest parent_state_digest;
        ParamOverrides overrides;
    };

    struct ScenarioNode
    {
        NodeId id{};
        std::optional<NodeId> parent;
        std::optional<BranchPoint> branch_point;
        ParamSet effective_params;
        std::int64_t start_step = 0;
        std::int64_t end_step = 0;
        NodeStatus status = NodeStatus::pending;
        std::vector<Annotation> annotations;
        std::string failure;          // cause when status == failed
        std::optional<NodeId> donor;  // most recent suffix donor when reused

        bool is_root() const noexcept { return !parent.has_value(); }
    };

    struct BranchResult
    {
        ScenarioNode node;
        bool duplicate = false; // an identical branch already existed and is returned
    };

    struct TreeViolation
    {
        enum class Kind
        {
            no_root,
            multiple_roots,
            cycle,
            missing_parent,
            digest_mismatch,
            window_inconsistent,
        };
        Kind kind;
        std::optional<NodeId> node;
        std::string message;
    };

    std::string_view to_string(TreeViolation::Kind k) noexcept;

    nlohmann::json node_to_json(const ScenarioNode &node);

    // Rooted tree of scenario nodes. Mutations are serialized through one
    // writer lock; readers receive copies taken under a shared lock.
    class ScenarioTree
    {
    public:
        explicit ScenarioTree(SimulatorSpec spec);

        const SimulatorSpec &spec() const noexcept { return spec_; }

        ScenarioNode create_root(const ParamSet &params, const FieldState &initial_state);

        // The parent's stored digest at branch_step is read from `store`.
        BranchResult branch_at(NodeId parent, std::int64_t branch_step, const ParamOverrides &overrides,
                               const Store &store);

        ScenarioNode annotate(NodeId node, AnnotationKind kind, std::string text);

        ScenarioNode get(NodeId node) const;
        bool contains(NodeId node) const;
        std::vector<ScenarioNode> nodes() const; // ascending id
        std::vector<NodeId> children(NodeId node) const;
        std::optional<NodeId> root() const;
        std::size_t depth(NodeId node) const;

        void set_status(NodeId node, NodeStatus status, std::string failure = {});
        void set_end_step(NodeId node, std::int64_t end_step);
        void set_donor(NodeId node, NodeId donor);

        nlohmann::json to_json() const;
        static ScenarioTree from_json(const SimulatorSpec &spec, const nlohmann::json &j);

        ScenarioTree(const ScenarioTree &other);
        ScenarioTree &operator=(const ScenarioTree &) = delete;

    private:
        ScenarioNode &node_locked(NodeId node);
        const ScenarioNode &node_locked(NodeId node) const;

        SimulatorSpec spec_;
        mutable std::shared_mutex mutex_;
        std::map<NodeId, ScenarioNode> nodes_;
        std::uint64_t next_id_ = 1;
    };

    // Empty iff: exactly one root, acyclic parent links, every child's branch
    // digest matches the parent's stored digest at that step, and windows are
    // consistent.
    std::vector<TreeViolation> validate_tree(const ScenarioTree &tree, const Store &store);
}
