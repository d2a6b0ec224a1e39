#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "branchsim/error.hpp"
#include "branchsim/probe.hpp"
#include "branchsim/workspace.hpp"
#include "support.hpp"

#include <algorithm>

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

    struct Fixture
    {
        std::unique_ptr<Workspace> ws =
            Workspace::create({}, StoreManifest{vessel_spec(20, 16), 10}, demo_params(20, 16), {});
        NodeId root{};
        NodeId child{};

        Fixture()
        {
            root = ws->root();
            ws->engine().run(RunRequest{root, 60, false});
            ParamOverrides o;
            o.diffusion = 0.05;
            child = ws->engine().branch(root, 33, o).node.id;
            ws->engine().run(RunRequest{child, 90, false});
        }
        const Store &store() const { return ws->store(); }
        const ScenarioTree &tree() const { return ws->tree(); }
    };
}

TEST_CASE("sample_point: exact cells, midpoints, uniform fields")
{
    Fixture f;
    const FieldState s = f.store().state_at(f.root, 40);
    const auto w = f.store().spec().width;
    for (CellIndex i : {CellIndex{0}, CellIndex{21}, CellIndex{w * 8 + 10}, f.store().spec().cell_count() - 1})
    {
        const ProbeQuery q{f.root, static_cast<double>(i % w), static_cast<double>(i / w), 40};
        CHECK(sample_point(f.store(), f.tree(), q) == s.reals()[i]);
    }
    const CellIndex a = 8 * w + 9;
    const double mid = sample_point(f.store(), f.tree(), ProbeQuery{f.root, 9.5, 8.0, 40});
    CHECK(mid == doctest::Approx((s.reals()[a] + s.reals()[a + 1]) / 2).epsilon(1e-15));

    const auto spec = vessel_spec(7, 5);
    std::map<CellIndex, double> uniform;
    for (CellIndex i = 0; i < spec.cell_count(); ++i)
        uniform[i] = 0.3;
    VesselParams still;
    still.dt = 0.1;
    auto ws = Workspace::create({}, StoreManifest{spec, 10}, still, uniform);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ux(0.0, 6.0);
    std::uniform_real_distribution<double> uy(0.0, 4.0);
    for (int k = 0; k < 200; ++k)
        CHECK(sample_point(ws->store(), ws->tree(), ProbeQuery{ws->root(), ux(rng), uy(rng), 0}) == 0.3);
}

TEST_CASE("sample_point stays within the surrounding cells")
{
    Fixture f;
    const FieldState s = f.store().state_at(f.child, 70);
    const auto w = f.store().spec().width;
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ux(0.0, 19.0);
    std::uniform_real_distribution<double> uy(0.0, 15.0);
    for (int k = 0; k < 500; ++k)
    {
        const double x = ux(rng);
        const double y = uy(rng);
        const auto x0 = static_cast<std::size_t>(x);
        const auto y0 = static_cast<std::size_t>(y);
        const std::size_t x1 = std::min<std::size_t>(x0 + 1, w - 1);
        const std::size_t y1 = std::min<std::size_t>(y0 + 1, 15);
        const double c[] = {s.reals()[y0 * w + x0], s.reals()[y0 * w + x1], s.reals()[y1 * w + x0],
                            s.reals()[y1 * w + x1]};
        const double v = sample_point(f.store(), f.tree(), ProbeQuery{f.child, x, y, 70});
        CHECK(v >= *std::min_element(std::begin(c), std::end(c)));
        CHECK(v <= *std::max_element(std::begin(c), std::end(c)));
    }
}

TEST_CASE("sample_point errors")
{
    Fixture f;
    CHECK(code_of([&] { sample_point(f.store(), f.tree(), ProbeQuery{f.root, -0.5, 1, 3}); }) ==
          ErrorCode::InvalidProbe);
    CHECK(code_of([&] { sample_point(f.store(), f.tree(), ProbeQuery{f.root, 19.01, 1, 3}); }) ==
          ErrorCode::InvalidProbe);
    CHECK(code_of([&] { sample_point(f.store(), f.tree(), ProbeQuery{f.root, 1, 1, 61}); }) ==
          ErrorCode::StepNotStored);
    CHECK(code_of([&] { sample_point(f.store(), f.tree(), ProbeQuery{NodeId{42}, 1, 1, 3}); }) ==
          ErrorCode::UnknownNode);
}

TEST_CASE("extract_frame follows the lineage")
{
    Fixture f;
    CHECK(same_bits(extract_frame(f.store(), f.tree(), f.root, 30).state, f.store().state_at(f.root, 30)));
    // Before the branch point the child shows its parent's frames.
    for (std::int64_t s : {0, 10, 32, 33})
    {
        const Frame viaChild = extract_frame(f.store(), f.tree(), f.child, s);
        CHECK(viaChild.step == s);
        CHECK(same_bits(viaChild.state, f.store().state_at(f.root, s)));
        CHECK(sample_point(f.store(), f.tree(), ProbeQuery{f.child, 4.25, 3.5, s}) ==
              sample_point(f.store(), f.tree(), ProbeQuery{f.root, 4.25, 3.5, s}));
    }
    CHECK(resolve_lineage(f.store(), f.tree(), f.child, 10) == f.root);
    CHECK(resolve_lineage(f.store(), f.tree(), f.child, 34) == f.child);
    CHECK(code_of([&] { extract_frame(f.store(), f.tree(), f.child, 91); }) == ErrorCode::StepNotStored);
    CHECK(code_of([&] { extract_frame(f.store(), f.tree(), f.root, 61); }) == ErrorCode::StepNotStored);
}

TEST_CASE("frame_deltas fold to full frames")
{
    Fixture f;
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 12; ++trial)
    {
        const NodeId node = trial % 2 ? f.child : f.root;
        const std::int64_t end = trial % 2 ? 90 : 60;
        const std::int64_t from = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(end - 5));
        const std::int64_t to = std::min<std::int64_t>(end, from + 1 + static_cast<std::int64_t>(rng() % 50));
        FieldState folded = extract_frame(f.store(), f.tree(), node, from).state;
        const auto deltas = frame_deltas(f.store(), f.tree(), node, from, to);
        REQUIRE(deltas.size() == static_cast<std::size_t>(to - from));
        for (const auto &d : deltas)
        {
            apply_delta(f.store().spec(), folded, d);
            REQUIRE(same_bits(folded, extract_frame(f.store(), f.tree(), node, d.step_index).state));
        }
    }
    CHECK(code_of([&] { frame_deltas(f.store(), f.tree(), f.root, 5, 5); }) == ErrorCode::InvalidRange);
}

TEST_CASE("frame deltas: identical frames give empty deltas")
{
    const auto spec = maxca_spec(4);
    std::map<CellIndex, double> full;
    for (CellIndex i = 0; i < 16; ++i)
        full[i] = 255;
    auto ws = Workspace::create({}, StoreManifest{spec, 10}, MaxcaParams{}, full);
    ws->engine().run(RunRequest{ws->root(), 3, false});
    for (const auto &d : frame_deltas(ws->store(), ws->tree(), ws->root(), 0, 3))
        CHECK(d.entries.empty());

    auto one = Workspace::create({}, StoreManifest{spec, 10}, MaxcaParams{}, {{0, 255}});
    one->engine().run(RunRequest{one->root(), 1, false});
    const auto d = frame_deltas(one->store(), one->tree(), one->root(), 0, 1);
    REQUIRE(d.size() == 1);
    CHECK(d[0].entries.size() == 2); // cells 1 and 4
}

TEST_CASE("json and block encodings")
{
    Fixture f;
    const Frame fr = extract_frame(f.store(), f.tree(), f.root, 12);
    const auto j = frame_to_json(fr);
    CHECK(j.at("step") == 12);
    CHECK(j.at("cells").size() == 320);
    CHECK(j.at("cells")[0].get<double>() == fr.state.reals()[0]);

    const auto deltas = frame_deltas(f.store(), f.tree(), f.root, 12, 14);
    const auto dj = frame_delta_to_json(deltas[0]);
    CHECK(dj.at("step") == 13);
    CHECK(dj.at("entries").size() == deltas[0].entries.size());

    const Bytes blob = frames_to_blocks(f.store().spec(), fr, deltas);
    CHECK(std::string(blob.begin(), blob.begin() + 5) == "BSIM1");
    CHECK(blob[6] == 1);
    CHECK(blob[8] == 1); // snapshot block tag
    CHECK(read_le64(blob.data() + 9) == 8 + 320 * 8);
}
