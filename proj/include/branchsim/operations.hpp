#pragma once

#include "branchsim/equivalence.hpp"
#include "branchsim/workspace.hpp"

#include "json.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace branchsim
{
    struct DeclaredBranch
    {
        std::int64_t at_step = 0;
        ParamOverrides overrides;
        std::vector<Annotation> annotations;
        std::optional<std::size_t> parent; // index of an earlier branch; root when absent
    };

    struct ScenarioConfig
    {
        SimulatorSpec spec;
        ParamSet params;
        std::map<CellIndex, double> seeds;
        std::int64_t horizon = 0;
        std::vector<DeclaredBranch> branches;
        ObservationSpec observation;
        std::int64_t checkpoint_interval = default_checkpoint_interval;
        std::size_t max_workers = 1;
    };

    // Throws InvalidConfig; JSON syntax errors report line and column.
    ScenarioConfig parse_config(const std::string &text);
    ScenarioConfig load_config(const std::filesystem::path &path);
    ScenarioConfig config_from_json(const nlohmann::json &j);

    ObservationSpec observation_from_json(const nlohmann::json &j);
    nlohmann::json observation_to_json(const ObservationSpec &obs);

    std::unique_ptr<Workspace> create_workspace(const ScenarioConfig &config, const std::filesystem::path &store_path);

    struct PredictResult
    {
        std::vector<NodeId> branch_nodes; // one per declared branch, in order; 0 when skipped
        std::vector<NodeId> failed;
    };

    // Runs the root up to its last declared branch step (or the horizon when no
    // branch is declared), creates the declared branches, and runs each level
    // of the tree until every leaf reaches the horizon.
    PredictResult predict(Workspace &ws, const ScenarioConfig &config, std::size_t workers);

    struct ReflectResult
    {
        NodeId node{};
        NodeId branch{};
        std::int64_t from = 0;
        std::int64_t to = 0;
        Digest original;
        Digest reflected;

        nlohmann::json to_json() const;
    };

    ReflectResult reflect(Workspace &ws, NodeId node, std::int64_t from, std::int64_t to,
                          const ParamOverrides &overrides);

    // Branches at a historical step of `node`'s lineage and runs the new branch
    // to `until` (the node's end step when absent).
    ScenarioNode retrospect(Workspace &ws, NodeId node, std::int64_t at_step, const ParamOverrides &overrides,
                            std::optional<std::int64_t> until);

    // Per-step observation digests following the node's lineage into ancestors.
    TrajectoryDigest lineage_trajectory_digest(const Workspace &ws, NodeId node, std::int64_t t0, std::int64_t t1,
                                               const ObservationSpec &obs);

    // Savings report plus equivalence classes of the leaves over the shared
    // prefix [t0, t_I] and suffix [t_I, t_f], and the resulting branch advice.
    nlohmann::json build_report(const Workspace &ws, const ObservationSpec &obs);
    std::string render_report_table(const nlohmann::json &report);

    // Line and column (1-based) of a byte offset in `text`.
    std::pair<std::size_t, std::size_t> line_column(const std::string &text, std::size_t byte_offset);
}
