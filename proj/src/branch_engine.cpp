#include "branchsim/branch_engine.hpp"

#include "branchsim/error.hpp"
#include "branchsim/json_io.hpp"

#include <algorithm>
#include <atomic>
#include <functional>
#include <map>
#include <thread>

namespace branchsim
{
    namespace
    {
        // Runs fn(0..count-1) on up to `workers` threads; each index is taken by
        // exactly one thread.
        void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)> &fn)
        {
            if (count == 0)
                return;
            std::atomic<std::size_t> next{0};
            auto drain = [&]
            {
                for (std::size_t i = next++; i < count; i = next++)
                    fn(i);
            };
            const std::size_t threads = std::min(workers, count);
            if (threads <= 1)
            {
                drain();
                return;
            }
            std::vector<std::jthread> pool;
            pool.reserve(threads);
            for (std::size_t t = 0; t < threads; ++t)
                pool.emplace_back(drain);
        }

        DirtySet merge(const DirtySet &a, const DirtySet &b)
        {
            DirtySet out;
            std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
            return out;
        }
    }

    Digest SuffixKey::digest() const
    {
        Bytes buf;
        buf.push_back(static_cast<std::uint8_t>(simulator));
        buf.insert(buf.end(), params.bytes.begin(), params.bytes.end());
        buf.insert(buf.end(), state.bytes.begin(), state.bytes.end());
        buf.push_back(absolute_step ? 1 : 0);
        write_le64(buf, static_cast<std::uint64_t>(absolute_step.value_or(0)));
        write_le64(buf, static_cast<std::uint64_t>(horizon));
        return sha256(buf);
    }

    MemoTable::MemoTable(const MemoTable &other)
    {
        std::lock_guard lock(other.mutex_);
        entries_ = other.entries_;
    }

    std::optional<MemoEntry> MemoTable::lookup(const SuffixKey &key) const
    {
        const Digest d = key.digest();
        std::lock_guard lock(mutex_);
        auto it = entries_.find(d);
        if (it == entries_.end())
            return std::nullopt;
        return it->second;
    }

    bool MemoTable::insert(const SuffixKey &key, const MemoEntry &entry)
    {
        const Digest d = key.digest();
        std::lock_guard lock(mutex_);
        return entries_.try_emplace(d, entry).second;
    }

    std::size_t MemoTable::size() const
    {
        std::lock_guard lock(mutex_);
        return entries_.size();
    }

    nlohmann::json MemoTable::to_json() const
    {
        std::lock_guard lock(mutex_);
        // Sorted for a stable manifest.
        std::map<Digest, MemoEntry> ordered(entries_.begin(), entries_.end());
        nlohmann::json out = nlohmann::json::array();
        for (const auto &[d, e] : ordered)
        {
            out.push_back({{"key", d.hex()}, {"node", raw(e.node)}, {"start", e.start}, {"length", e.length}});
        }
        return out;
    }

    MemoTable MemoTable::from_json(const nlohmann::json &j)
    {
        MemoTable table;
        try
        {
            for (const auto &e : j)
            {
                table.entries_.emplace(Digest::from_hex(e.at("key").get<std::string>()),
                                       MemoEntry{static_cast<NodeId>(e.at("node").get<std::uint64_t>()),
                                                 e.at("start").get<std::int64_t>(),
                                                 e.at("length").get<std::int64_t>()});
            }
        }
        catch (const nlohmann::json::exception &e)
        {
            fail(ErrorCode::CorruptStore, std::string("memo table unreadable: ") + e.what());
        }
        return table;
    }

    BranchEngine::BranchEngine(ScenarioTree &tree, Store &store, CostLedger &ledger, MemoTable &memo)
        : tree_(tree), store_(store), ledger_(ledger), memo_(memo)
    {
        if (!(tree_.spec() == store_.spec()))
        {
            fail(ErrorCode::InvalidConfig, "tree and store disagree on the simulator spec");
        }
    }

    ScenarioNode BranchEngine::create_root(const ParamSet &params, const FieldState &initial)
    {
        ScenarioNode root = tree_.create_root(params, initial);
        store_.begin_track(root.id, initial);
        ledger_.register_node(root.id);
        return root;
    }

    BranchResult BranchEngine::branch(NodeId parent, std::int64_t branch_step, const ParamOverrides &overrides)
    {
        BranchResult result = tree_.branch_at(parent, branch_step, overrides, store_);
        ledger_.register_node(result.node.id);
        return result;
    }

    SuffixKey BranchEngine::suffix_key(const ScenarioNode &node, std::int64_t from_step, std::int64_t horizon) const
    {
        const auto &spec = store_.spec();
        SuffixKey key;
        key.simulator = spec.simulator;
        key.params = params_digest(node.effective_params);
        key.state = store_.digest_at(node.id, from_step);
        if (!spec.time_invariant())
            key.absolute_step = from_step;
        key.horizon = horizon;
        return key;
    }

    DirtySet BranchEngine::dirty_into(NodeId node, std::int64_t step) const
    {
        const auto &spec = store_.spec();
        const auto window = store_.window(node);
        if (!window)
            return all_cells(spec);
        if (step > window->first)
        {
            DirtySet out;
            for (const auto &e : store_.delta_at(node, step).entries)
                out.push_back(e.index);
            return out;
        }

        const ScenarioNode n = tree_.get(node);
        if (n.is_root())
            return all_cells(spec);
        const ScenarioNode parent = tree_.get(*n.parent);
        const std::int64_t branch_step = n.branch_point->branch_step;
        const auto parent_window = store_.window(parent.id);
        if (!parent_window || branch_step <= parent_window->first)
            return all_cells(spec);

        const auto footprint = parameter_change_footprint(spec, parent.effective_params, n.effective_params);
        if (!footprint)
            return all_cells(spec);
        DirtySet out = merge(dirty_into(parent.id, branch_step), *footprint);
        DirtySet perturbed;
        for (const auto &[cell, value] : n.branch_point->overrides.perturbation)
            perturbed.push_back(cell);
        return merge(out, perturbed);
    }

    FieldState BranchEngine::materialize_branch_start(NodeId child)
    {
        const ScenarioNode node = tree_.get(child);
        if (node.is_root())
        {
            return store_.state_at(child, node.start_step);
        }
        if (store_.has_track(child))
        {
            return store_.state_at(child, node.start_step);
        }
        const BranchPoint &bp = *node.branch_point;
        std::size_t applied = 0;
        FieldState state = store_.state_at(*node.parent, bp.branch_step, &applied);
        ledger_.record_steps(child, StepKind::replay, applied);
        if (digest_state(store_.spec(), state) != bp.parent_state_digest)
        {
            fail(ErrorCode::CorruptLineage, "reconstructed state of node " + to_string(*node.parent) + " at step " +
                                                std::to_string(bp.branch_step) + " does not match the branch digest");
        }
        apply_perturbation(store_.spec(), state, bp.overrides.perturbation);
        store_.begin_track(child, state);
        return state;
    }

    void BranchEngine::claim(NodeId node)
    {
        std::lock_guard lock(running_mutex_);
        if (!running_.insert(node).second)
        {
            fail(ErrorCode::NodeBusy, "node " + to_string(node) + " is already running");
        }
    }

    void BranchEngine::release(NodeId node)
    {
        std::lock_guard lock(running_mutex_);
        running_.erase(node);
    }

    ScenarioNode BranchEngine::run(const RunRequest &request)
    {
        claim(request.node);
        try
        {
            ScenarioNode out = run_claimed(request);
            release(request.node);
            return out;
        }
        catch (...)
        {
            release(request.node);
            throw;
        }
    }

    ScenarioNode BranchEngine::run_claimed(const RunRequest &request)
    {
        const NodeId id = request.node;
        ScenarioNode node = tree_.get(id);
        if (node.status == NodeStatus::failed)
        {
            return node;
        }
        try
        {
            if (!store_.has_track(id))
            {
                materialize_branch_start(id);
            }
            const std::int64_t end = store_.window(id)->second;
            if (request.until_step <= end)
            {
                if (node.status == NodeStatus::pending)
                    tree_.set_status(id, NodeStatus::complete);
                return tree_.get(id);
            }

            tree_.set_status(id, NodeStatus::running);
            const std::int64_t horizon = request.until_step - end;
            const SuffixKey key = suffix_key(node, end, horizon);

            if (const auto hit = memo_.lookup(key); hit && hit->node != id)
            {
                store_.link(id, hit->node, hit->start, horizon);
                ledger_.record_steps(id, StepKind::reused, static_cast<std::uint64_t>(horizon));
                tree_.set_end_step(id, request.until_step);
                tree_.set_donor(id, hit->node);
                tree_.set_status(id, NodeStatus::reused);
                return tree_.get(id);
            }

            const auto &spec = store_.spec();
            FieldState state = store_.state_at(id, end);
            DirtySet dirty;
            if (request.incremental)
                dirty = dirty_into(id, end);
            for (std::int64_t s = end; s < request.until_step; ++s)
            {
                ledger_.record_step(id, StepKind::fresh);
                FieldState next;
                if (request.incremental)
                {
                    IncrementalStep r = step_incremental(spec, node.effective_params, state, dirty);
                    next = std::move(r.state);
                    dirty = std::move(r.dirty);
                }
                else
                {
                    next = step_full(spec, node.effective_params, state);
                }
                store_.append(id, state, next);
                tree_.set_end_step(id, next.step_index);
                state = std::move(next);
            }
            memo_.insert(key, MemoEntry{id, end, horizon});
            tree_.set_status(id, NodeStatus::complete);
            return tree_.get(id);
        }
        catch (const Error &e)
        {
            tree_.set_status(id, NodeStatus::failed, e.what());
            throw;
        }
    }

    void BranchEngine::run_tree(std::int64_t until_step, std::size_t max_workers)
    {
        if (max_workers == 0)
        {
            fail(ErrorCode::InvalidWorkerCount, "max_workers must be at least 1");
        }
        std::map<NodeId, std::int64_t> targets;
        for (const auto &n : tree_.nodes())
        {
            if (n.status == NodeStatus::pending)
                targets.emplace(n.id, until_step);
        }
        run_targets(targets, max_workers);
    }

    void BranchEngine::run_targets(const std::map<NodeId, std::int64_t> &targets, std::size_t max_workers)
    {
        if (max_workers == 0)
        {
            fail(ErrorCode::InvalidWorkerCount, "max_workers must be at least 1");
        }
        std::map<std::size_t, std::vector<NodeId>> waves;
        for (const auto &[id, until] : targets)
        {
            waves[tree_.depth(id)].push_back(id);
        }

        for (auto &[depth, ids] : waves)
        {
            // Materialize branch starts so suffix keys are known up front.
            parallel_for(ids.size(), max_workers,
                         [&](std::size_t i)
                         {
                             try
                             {
                                 if (!store_.has_track(ids[i]))
                                     materialize_branch_start(ids[i]);
                             }
                             catch (const Error &e)
                             {
                                 tree_.set_status(ids[i], NodeStatus::failed, e.what());
                             }
                         });

            // Nodes sharing a suffix key form a group; the lowest id computes
            // and the others link to it, whatever the worker count.
            std::map<Digest, std::vector<NodeId>> groups;
            std::vector<std::vector<NodeId>> ordered;
            for (NodeId id : ids)
            {
                const ScenarioNode n = tree_.get(id);
                if (n.status == NodeStatus::failed)
                    continue;
                const std::int64_t end = store_.window(id)->second;
                const std::int64_t until = targets.at(id);
                if (until <= end)
                {
                    ordered.push_back({id});
                    continue;
                }
                groups[suffix_key(n, end, until - end).digest()].push_back(id);
            }
            for (auto &[key, members] : groups)
                ordered.push_back(std::move(members));
            std::sort(ordered.begin(), ordered.end());

            parallel_for(ordered.size(), max_workers,
                         [&](std::size_t g)
                         {
                             for (NodeId id : ordered[g])
                             {
                                 try
                                 {
                                     run(RunRequest{id, targets.at(id), false});
                                 }
                                 catch (const Error &)
                                 {
                                     // recorded on the node by run()
                                 }
                             }
                         });
        }
    }

    ScenarioNode BranchEngine::reflect_update(NodeId node, const ParamOverrides &overrides, std::int64_t from,
                                              std::int64_t to)
    {
        const ScenarioNode n = tree_.get(node);
        if (to > n.end_step)
        {
            fail(ErrorCode::NotYetSimulated, "window ends after step " + std::to_string(n.end_step));
        }
        if (from < n.start_step)
        {
            fail(ErrorCode::StepNotStored, "window starts before the node's own trajectory");
        }
        if (from >= to)
        {
            fail(ErrorCode::InvalidRange, "reflection window must span at least one step");
        }
        const BranchResult child = branch(node, from, overrides);
        return run(RunRequest{child.node.id, to, true});
    }
}
