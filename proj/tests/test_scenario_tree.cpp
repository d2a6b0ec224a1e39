#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "branchsim/error.hpp"
#include "branchsim/scenario_tree.hpp"
#include "support.hpp"

using namespace branchsim;
using namespace testing_support;

namespace
{
    ErrorCode code_of(auto &&fn)
    {
        try
        {
            fn();
        }
        catch (const Error &e)
        {
            return e.code();
        }
        FAIL("expected an Error");
        return ErrorCode::InvalidConfig;
    }

    // Tree with a root simulated to `steps` and the matching store.
    struct Fixture
    {
        SimulatorSpec spec = vessel_spec(8, 8);
        VesselParams params = demo_params(8, 8);
        std::unique_ptr<Store> store = Store::create({}, StoreManifest{spec, 10});
        ScenarioTree tree{spec};
        NodeId root{};

        explicit Fixture(std::int64_t steps)
        {
            FieldState s = init_state(spec, {});
            root = tree.create_root(params, s).id;
            store->begin_track(root, s);
            for (std::int64_t k = 0; k < steps; ++k)
            {
                FieldState next = step_full(spec, params, s);
                store->append(root, s, next);
                s = next;
            }
            tree.set_end_step(root, steps);
        }
    };
}

TEST_CASE("create_root")
{
    const auto spec = vessel_spec(6, 6);
    ScenarioTree tree(spec);
    const ScenarioNode a = tree.create_root(demo_params(6, 6), init_state(spec, {}));
    CHECK(a.start_step == 0);
    CHECK(a.end_step == 0);
    CHECK(a.is_root());
    CHECK(a.status == NodeStatus::pending);

    VesselParams unstable = demo_params(6, 6);
    unstable.dt = 5.0;
    CHECK(code_of([&] { tree.create_root(unstable, init_state(spec, {})); }) == ErrorCode::UnstableParams);

    const ScenarioNode b = tree.create_root(demo_params(6, 6), init_state(spec, {}));
    CHECK(a.id != b.id);
}

TEST_CASE("branch_at")
{
    Fixture f(20);
    SUBCASE("at the end step")
    {
        const BranchResult r = f.tree.branch_at(f.root, 20, {}, *f.store);
        CHECK_FALSE(r.duplicate);
        CHECK(r.node.parent == f.root);
        CHECK(r.node.start_step == 20);
        CHECK(r.node.end_step == 20);
        CHECK(r.node.effective_params == ParamSet(f.params));
        CHECK(r.node.branch_point->parent_state_digest == f.store->digest_at(f.root, 20));
        CHECK(f.tree.children(f.root) == std::vector<NodeId>{r.node.id});
        CHECK(f.tree.depth(r.node.id) == 1);
    }
    SUBCASE("beyond the window")
    {
        CHECK(code_of([&] { f.tree.branch_at(f.root, 25, {}, *f.store); }) == ErrorCode::NotYetSimulated);
    }
    SUBCASE("unknown parent")
    {
        CHECK(code_of([&] { f.tree.branch_at(NodeId{77}, 5, {}, *f.store); }) == ErrorCode::UnknownNode);
    }
    SUBCASE("overrides change effective params; duplicates return the existing node")
    {
        ParamOverrides o;
        o.diffusion = 0.05;
        const BranchResult a = f.tree.branch_at(f.root, 7, o, *f.store);
        CHECK(std::get<VesselParams>(a.node.effective_params).diffusion == 0.05);
        const BranchResult b = f.tree.branch_at(f.root, 7, o, *f.store);
        CHECK(b.duplicate);
        CHECK(b.node.id == a.node.id);
        const BranchResult c = f.tree.branch_at(f.root, 8, o, *f.store);
        CHECK_FALSE(c.duplicate);
    }
    SUBCASE("unstable override")
    {
        ParamOverrides o;
        o.diffusion = 10.0;
        CHECK(code_of([&] { f.tree.branch_at(f.root, 7, o, *f.store); }) == ErrorCode::UnstableParams);
        CHECK(f.tree.nodes().size() == 1);
    }
}

TEST_CASE("annotate")
{
    Fixture f(0);
    f.tree.annotate(f.root, AnnotationKind::evaluative, "rupture risk high");
    f.tree.annotate(f.root, AnnotationKind::conditional, "if pressure rises");
    const auto anns = f.tree.get(f.root).annotations;
    REQUIRE(anns.size() == 2);
    CHECK(anns[0].kind == AnnotationKind::evaluative);
    CHECK(anns[0].text == "rupture risk high");
    CHECK(anns[1].kind == AnnotationKind::conditional);
    CHECK(code_of([&] { f.tree.annotate(f.root, AnnotationKind::conditional, ""); }) ==
          ErrorCode::InvalidAnnotation);
    CHECK(code_of([&] { f.tree.annotate(NodeId{9}, AnnotationKind::descriptive, "x"); }) == ErrorCode::UnknownNode);
    CHECK(annotation_kind_from_string("prescriptive") == AnnotationKind::prescriptive);
    CHECK(code_of([] { annotation_kind_from_string("vague"); }) == ErrorCode::InvalidAnnotation);
}

TEST_CASE("validate_tree")
{
    Fixture f(15);
    CHECK(validate_tree(f.tree, *f.store).empty());

    const NodeId child = f.tree.branch_at(f.root, 12, {}, *f.store).node.id;
    CHECK(validate_tree(f.tree, *f.store).empty());

    SUBCASE("tampered branch digest")
    {
        auto j = f.tree.to_json();
        for (auto &n : j["nodes"])
        {
            if (n["id"] == raw(child))
                n["branch_point"]["parent_state_digest"] = std::string(64, '0');
        }
        const ScenarioTree tampered = ScenarioTree::from_json(f.spec, j);
        const auto v = validate_tree(tampered, *f.store);
        REQUIRE(v.size() == 1);
        CHECK(v[0].kind == TreeViolation::Kind::digest_mismatch);
        CHECK(v[0].node == child);
    }
    SUBCASE("two roots")
    {
        f.tree.create_root(f.params, init_state(f.spec, {}));
        const auto v = validate_tree(f.tree, *f.store);
        REQUIRE(v.size() == 1);
        CHECK(v[0].kind == TreeViolation::Kind::multiple_roots);
    }
}

TEST_CASE("json round trip keeps everything")
{
    Fixture f(10);
    ParamOverrides o;
    o.source_amp = 4.0;
    const NodeId c = f.tree.branch_at(f.root, 10, o, *f.store).node.id;
    f.tree.annotate(c, AnnotationKind::prescriptive, "boost");
    f.tree.set_status(c, NodeStatus::failed, "NumericFault: step 3");
    const ScenarioTree copy = ScenarioTree::from_json(f.spec, f.tree.to_json());
    CHECK(copy.to_json() == f.tree.to_json());
    CHECK(copy.get(c).failure == "NumericFault: step 3");
    // Ids keep counting after a reload.
    ScenarioTree again = ScenarioTree::from_json(f.spec, f.tree.to_json());
    CHECK(raw(again.branch_at(f.root, 3, {}, *f.store).node.id) == raw(c) + 1);
}
