#include "branchsim/workspace.hpp"

#include "branchsim/error.hpp"

namespace branchsim
{
    Workspace::Workspace(std::unique_ptr<Store> store, ScenarioTree tree, CostLedger ledger, MemoTable memo)
        : store_(std::move(store)), tree_(std::move(tree)), ledger_(std::move(ledger)), memo_(std::move(memo)),
          engine_(tree_, *store_, ledger_, memo_)
    {
    }

    std::unique_ptr<Workspace> Workspace::create(const std::filesystem::path &path, const StoreManifest &manifest,
                                                 const ParamSet &params, const std::map<CellIndex, double> &seeds)
    {
        check_params(manifest.spec, params);
        const FieldState initial = init_state(manifest.spec, seeds);
        auto store = Store::create(path, manifest);
        std::unique_ptr<Workspace> ws(
            new Workspace(std::move(store), ScenarioTree(manifest.spec), CostLedger{}, MemoTable{}));
        ws->engine_.create_root(params, initial);
        ws->save();
        return ws;
    }

    std::unique_ptr<Workspace> Workspace::open(const std::filesystem::path &path)
    {
        auto store = Store::open(path);
        const auto tree_json = store->section("tree");
        if (tree_json.is_null())
        {
            fail(ErrorCode::CorruptStore, "store has no scenario tree");
        }
        ScenarioTree tree = ScenarioTree::from_json(store->spec(), tree_json);
        CostLedger ledger = CostLedger::from_json(store->section("ledger"));
        MemoTable memo = MemoTable::from_json(store->section("memo"));
        return std::unique_ptr<Workspace>(
            new Workspace(std::move(store), std::move(tree), std::move(ledger), std::move(memo)));
    }

    NodeId Workspace::root() const
    {
        const auto r = tree_.root();
        if (!r)
        {
            fail(ErrorCode::UnknownNode, "workspace has no root");
        }
        return *r;
    }

    void Workspace::save()
    {
        store_->set_section("tree", tree_.to_json());
        store_->set_section("ledger", ledger_.to_json());
        store_->set_section("memo", memo_.to_json());
        store_->save();
    }
}
