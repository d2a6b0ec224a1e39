#include "branchsim/operations.hpp"

#include "branchsim/error.hpp"
#include "branchsim/json_io.hpp"
#include "branchsim/probe.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace branchsim
{
    std::pair<std::size_t, std::size_t> line_column(const std::string &text, std::size_t byte_offset)
    {
        std::size_t line = 1;
        std::size_t column = 1;
        for (std::size_t i = 0; i < std::min(byte_offset, text.size()); ++i)
        {
            if (text[i] == '\n')
            {
                ++line;
                column = 1;
            }
            else
            {
                ++column;
            }
        }
        return {line, column};
    }

    ObservationSpec observation_from_json(const nlohmann::json &j)
    {
        if (j.is_null())
            return ObservationSpec::full();
        const auto mode = j.value("mode", std::string("full_state"));
        if (mode == "full_state")
            return ObservationSpec::full();
        if (mode != "region_of_interest")
            fail(ErrorCode::InvalidConfig, "unknown observation mode '" + mode + "'");
        if (!j.contains("roi") || !j.at("roi").is_array() || j.at("roi").size() != 4)
            fail(ErrorCode::InvalidConfig, "region_of_interest needs roi: [x0, y0, x1, y1]");
        const auto r = j.at("roi").get<std::vector<std::size_t>>();
        return ObservationSpec::region(CellRect{r[0], r[1], r[2], r[3]});
    }

    nlohmann::json observation_to_json(const ObservationSpec &obs)
    {
        if (obs.mode == ObservationSpec::Mode::full_state)
            return {{"mode", "full_state"}};
        return {{"mode", "region_of_interest"}, {"roi", {obs.roi.x0, obs.roi.y0, obs.roi.x1, obs.roi.y1}}};
    }

    ScenarioConfig config_from_json(const nlohmann::json &j)
    {
        static const std::set<std::string> allowed = {"spec",    "params",      "seeds",      "horizon",
                                                      "branches", "observation", "checkpoint_interval",
                                                      "max_workers"};
        if (!j.is_object())
            fail(ErrorCode::InvalidConfig, "config must be a JSON object");
        for (const auto &item : j.items())
        {
            if (!allowed.contains(item.key()))
                fail(ErrorCode::InvalidConfig, "unknown config key '" + item.key() + "'");
        }
        ScenarioConfig c;
        try
        {
            c.spec = spec_from_json(j.at("spec"));
            c.params = params_from_json(c.spec, j.value("params", nlohmann::json::object()));
            for (const auto &[cell, value] :
                 j.value("seeds", nlohmann::json::array()).get<std::vector<std::pair<CellIndex, double>>>())
            {
                c.seeds[cell] = value;
            }
            c.horizon = j.at("horizon").get<std::int64_t>();
            c.checkpoint_interval = j.value("checkpoint_interval", default_checkpoint_interval);
            c.max_workers = j.value("max_workers", std::size_t{1});
            c.observation = observation_from_json(j.value("observation", nlohmann::json()));
            const auto branches = j.value("branches", nlohmann::json::array());
            for (std::size_t k = 0; k < branches.size(); ++k)
            {
                const auto &bj = branches[k];
                const std::string where = "branches[" + std::to_string(k) + "]";
                for (const auto &item : bj.items())
                {
                    if (item.key() != "at_step" && item.key() != "overrides" && item.key() != "annotations" &&
                        item.key() != "parent")
                        fail(ErrorCode::InvalidConfig, "unknown key '" + item.key() + "' in " + where);
                }
                DeclaredBranch b;
                b.at_step = bj.at("at_step").get<std::int64_t>();
                b.overrides = overrides_from_json(bj.value("overrides", nlohmann::json::object()));
                for (const auto &a : bj.value("annotations", nlohmann::json::array()))
                {
                    b.annotations.push_back(Annotation{annotation_kind_from_string(a.at("kind").get<std::string>()),
                                                       a.value("text", std::string())});
                }
                if (bj.contains("parent") && !bj.at("parent").is_null())
                {
                    b.parent = bj.at("parent").get<std::size_t>();
                    if (*b.parent >= k)
                        fail(ErrorCode::InvalidConfig, where + ".parent must name an earlier branch");
                }
                if (b.at_step < 0 || b.at_step > c.horizon)
                    fail(ErrorCode::InvalidConfig, where + ".at_step must lie in [0, horizon]");
                c.branches.push_back(std::move(b));
            }
        }
        catch (const nlohmann::json::exception &e)
        {
            fail(ErrorCode::InvalidConfig, e.what());
        }
        if (c.horizon <= 0)
            fail(ErrorCode::InvalidConfig, "horizon must be positive");
        if (c.checkpoint_interval <= 0)
            fail(ErrorCode::InvalidConfig, "checkpoint_interval must be positive");
        if (c.max_workers == 0)
            fail(ErrorCode::InvalidWorkerCount, "max_workers must be at least 1");
        check_params(c.spec, c.params);
        init_state(c.spec, c.seeds);
        for (const auto &b : c.branches)
        {
            if (b.at_step < 0)
                fail(ErrorCode::InvalidConfig, "branch step must be nonnegative");
        }
        return c;
    }

    ScenarioConfig parse_config(const std::string &text)
    {
        nlohmann::json j;
        try
        {
            j = nlohmann::json::parse(text);
        }
        catch (const nlohmann::json::parse_error &e)
        {
            const auto [line, column] = line_column(text, e.byte == 0 ? 0 : e.byte - 1);
            fail(ErrorCode::InvalidConfig, "config parse error at line " + std::to_string(line) + ", column " +
                                               std::to_string(column) + ": " + e.what());
        }
        return config_from_json(j);
    }

    ScenarioConfig load_config(const std::filesystem::path &path)
    {
        std::ifstream in(path);
        if (!in)
        {
            fail(ErrorCode::InvalidConfig, "cannot read config " + path.string());
        }
        std::stringstream buf;
        buf << in.rdbuf();
        return parse_config(buf.str());
    }

    std::unique_ptr<Workspace> create_workspace(const ScenarioConfig &config, const std::filesystem::path &store_path)
    {
        auto ws = Workspace::create(store_path, StoreManifest{config.spec, config.checkpoint_interval},
                                    config.params, config.seeds);
        ws->store().set_section("observation", observation_to_json(config.observation));
        ws->save();
        return ws;
    }

    PredictResult predict(Workspace &ws, const ScenarioConfig &config, std::size_t workers)
    {
        auto &engine = ws.engine();
        const std::size_t n = config.branches.size();

        // Each plan node runs to its last child's branch step, leaves to the horizon.
        auto target_of = [&](std::optional<std::size_t> plan)
        {
            std::optional<std::int64_t> last;
            for (const auto &b : config.branches)
            {
                if (b.parent == plan)
                    last = std::max(last.value_or(b.at_step), b.at_step);
            }
            return last.value_or(config.horizon);
        };

        PredictResult result;
        result.branch_nodes.assign(n, NodeId{});
        const NodeId root = ws.root();
        engine.run_targets({{root, target_of(std::nullopt)}}, workers);

        std::vector<std::optional<std::size_t>> frontier = {std::nullopt};
        std::vector<bool> created(n, false);
        while (!frontier.empty())
        {
            std::map<NodeId, std::int64_t> targets;
            std::vector<std::optional<std::size_t>> next;
            for (std::size_t k = 0; k < n; ++k)
            {
                const auto &b = config.branches[k];
                if (created[k] || std::find(frontier.begin(), frontier.end(), b.parent) == frontier.end())
                    continue;
                const NodeId parent = b.parent ? result.branch_nodes[*b.parent] : root;
                if (ws.tree().get(parent).end_step < b.at_step)
                {
                    // Parent failed first; the branch and its subtree are skipped.
                    created[k] = true;
                    continue;
                }
                const BranchResult br = engine.branch(parent, b.at_step, b.overrides);
                if (!br.duplicate)
                {
                    for (const auto &a : b.annotations)
                        ws.tree().annotate(br.node.id, a.kind, a.text);
                }
                result.branch_nodes[k] = br.node.id;
                created[k] = true;
                targets[br.node.id] = target_of(k);
                next.push_back(k);
            }
            engine.run_targets(targets, workers);
            frontier = std::move(next);
        }
        for (const auto &node : ws.tree().nodes())
        {
            if (node.status == NodeStatus::failed)
                result.failed.push_back(node.id);
        }
        ws.save();
        return result;
    }

    nlohmann::json ReflectResult::to_json() const
    {
        return {{"node", raw(node)},
                {"branch", raw(branch)},
                {"window", {from, to}},
                {"original_digest", original.hex()},
                {"reflected_digest", reflected.hex()},
                {"unchanged", original == reflected}};
    }

    ReflectResult reflect(Workspace &ws, NodeId node, std::int64_t from, std::int64_t to,
                          const ParamOverrides &overrides)
    {
        const ScenarioNode child = ws.engine().reflect_update(node, overrides, from, to);
        ReflectResult out;
        out.node = node;
        out.branch = child.id;
        out.from = from;
        out.to = to;
        out.original = trajectory_digest(ws.store(), node, from, to, ObservationSpec::full()).combined;
        out.reflected = trajectory_digest(ws.store(), child.id, from, to, ObservationSpec::full()).combined;
        ws.save();
        return out;
    }

    ScenarioNode retrospect(Workspace &ws, NodeId node, std::int64_t at_step, const ParamOverrides &overrides,
                            std::optional<std::int64_t> until)
    {
        const ScenarioNode target = ws.tree().get(node);
        // The lineage owner of the historical step is where the branch attaches.
        const NodeId owner = resolve_lineage(ws.store(), ws.tree(), node, at_step);
        const std::int64_t end = until.value_or(target.end_step);
        const BranchResult br = ws.engine().branch(owner, at_step, overrides);
        ScenarioNode out = br.node;
        if (end > at_step)
            out = ws.engine().run(RunRequest{br.node.id, end, false});
        ws.save();
        return out;
    }

    TrajectoryDigest lineage_trajectory_digest(const Workspace &ws, NodeId node, std::int64_t t0, std::int64_t t1,
                                               const ObservationSpec &obs)
    {
        if (t0 > t1)
            fail(ErrorCode::InvalidRange, "interval start after end");
        TrajectoryDigest out{node, t0, t1, {}, {}};
        for (std::int64_t s = t0; s <= t1; ++s)
        {
            const NodeId owner = resolve_lineage(ws.store(), ws.tree(), node, s);
            if (obs.mode == ObservationSpec::Mode::full_state)
                out.per_step.push_back(ws.store().digest_at(owner, s));
            else
                out.per_step.push_back(sha256(observe(ws.store().spec(), ws.store().state_at(owner, s), obs)));
        }
        out.combined = combine_digests(out.per_step);
        return out;
    }

    namespace
    {
        nlohmann::json classes_json(const std::map<Digest, std::set<NodeId>> &groups)
        {
            nlohmann::json out = nlohmann::json::array();
            for (const auto &[d, members] : groups)
            {
                nlohmann::json ids = nlohmann::json::array();
                for (NodeId id : members)
                    ids.push_back(raw(id));
                out.push_back({{"representative", d.hex()}, {"members", std::move(ids)}});
            }
            return out;
        }
    }

    nlohmann::json build_report(const Workspace &ws, const ObservationSpec &obs)
    {
        const SavingsReport savings = savings_report(ws.tree(), ws.ledger());
        nlohmann::json report{{"savings", savings.to_json()}};

        const auto nodes = ws.tree().nodes();
        std::set<NodeId> parents;
        for (const auto &n : nodes)
        {
            if (n.parent)
                parents.insert(*n.parent);
        }
        std::vector<const ScenarioNode *> leaves;
        for (const auto &n : nodes)
        {
            if (!parents.contains(n.id))
                leaves.push_back(&n);
        }

        const std::int64_t t0 = ws.tree().get(ws.root()).start_step;
        std::int64_t t_branch = t0;
        std::int64_t t_final = leaves.front()->end_step;
        for (const auto *leaf : leaves)
        {
            t_branch = std::max(t_branch, leaf->start_step);
            t_final = std::min(t_final, leaf->end_step);
        }

        nlohmann::json equivalence{{"observation", observation_to_json(obs)}};
        if (t_final >= t_branch)
        {
            std::map<Digest, std::set<NodeId>> prefix;
            std::map<Digest, std::set<NodeId>> suffix;
            for (const auto *leaf : leaves)
            {
                prefix[lineage_trajectory_digest(ws, leaf->id, t0, t_branch, obs).combined].insert(leaf->id);
                suffix[lineage_trajectory_digest(ws, leaf->id, t_branch, t_final, obs).combined].insert(leaf->id);
            }
            const auto advice = theorem72_advice(static_cast<std::int64_t>(prefix.size()),
                                                 static_cast<std::int64_t>(suffix.size()));
            equivalence["prefix_interval"] = {t0, t_branch};
            equivalence["suffix_interval"] = {t_branch, t_final};
            equivalence["prefix_classes"] = classes_json(prefix);
            equivalence["suffix_classes"] = classes_json(suffix);
            equivalence["no_gain"] = theorem71_no_gain(advice.prefix_classes, advice.suffix_classes);
            equivalence["advice"] = to_string(advice.verdict);
        }
        else
        {
            equivalence["advice"] = nullptr;
        }
        report["equivalence"] = std::move(equivalence);
        return report;
    }

    std::string render_report_table(const nlohmann::json &report)
    {
        std::ostringstream out;
        const auto &s = report.at("savings");
        out << std::left << std::setw(8) << "node" << std::right << std::setw(10) << "fresh" << std::setw(10)
            << "replay" << std::setw(10) << "reused" << '\n';
        for (const auto &n : s.at("nodes"))
        {
            out << std::left << std::setw(8) << n.at("id").get<std::uint64_t>() << std::right << std::setw(10)
                << n.at("fresh").get<std::uint64_t>() << std::setw(10) << n.at("replay").get<std::uint64_t>()
                << std::setw(10) << n.at("reused").get<std::uint64_t>() << '\n';
        }
        out << "steps_linear    " << s.at("steps_linear").get<std::uint64_t>() << '\n';
        out << "steps_branching " << s.at("steps_branching").get<std::uint64_t>() << '\n';
        out << "ratio           " << std::setprecision(6) << s.at("ratio").get<double>() << '\n';
        const auto &eq = report.at("equivalence");
        if (!eq.at("advice").is_null())
        {
            out << "prefix classes  " << eq.at("prefix_classes").size() << '\n';
            out << "suffix classes  " << eq.at("suffix_classes").size() << '\n';
            out << "advice          " << eq.at("advice").get<std::string>() << '\n';
        }
        return out.str();
    }
}
