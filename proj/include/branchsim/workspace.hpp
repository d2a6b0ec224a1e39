#pragma once

#include "branchsim/branch_engine.hpp"

#include <filesystem>
#include <memory>

namespace branchsim
{
    // A store together with the tree, ledger and memo table persisted in its
    // manifest, and the engine wired to all four.
    class Workspace
    {
    public:
        static std::unique_ptr<Workspace> create(const std::filesystem::path &path, const StoreManifest &manifest,
                                                 const ParamSet &params, const std::map<CellIndex, double> &seeds);
        static std::unique_ptr<Workspace> open(const std::filesystem::path &path);

        Workspace(const Workspace &) = delete;
        Workspace &operator=(const Workspace &) = delete;

        Store &store() noexcept { return *store_; }
        const Store &store() const noexcept { return *store_; }
        ScenarioTree &tree() noexcept { return tree_; }
        const ScenarioTree &tree() const noexcept { return tree_; }
        CostLedger &ledger() noexcept { return ledger_; }
        const CostLedger &ledger() const noexcept { return ledger_; }
        MemoTable &memo() noexcept { return memo_; }
        BranchEngine &engine() noexcept { return engine_; }

        NodeId root() const;

        // Writes tree, ledger and memo sections and flushes segments.
        void save();

    private:
        Workspace(std::unique_ptr<Store> store, ScenarioTree tree, CostLedger ledger, MemoTable memo);

        std::unique_ptr<Store> store_;
        ScenarioTree tree_;
        CostLedger ledger_;
        MemoTable memo_;
        BranchEngine engine_;
    };
}
