#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "branchsim/error.hpp"
#include "support.hpp"

#include <cmath>
#include <numeric>

using namespace branchsim;
using namespace testing_support;

namespace
{
    VesselParams pure_diffusion(double d, double dt)
    {
        VesselParams p;
        p.diffusion = d;
        p.dt = dt;
        return p;
    }

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
}

TEST_CASE("init_state places seeds and zeroes the rest")
{
    const auto v = vessel_spec(5, 5);
    const FieldState z = init_state(v, {});
    CHECK(z.step_index == 0);
    CHECK(z.size() == 25);
    for (double x : z.reals())
        CHECK(x == 0.0);

    const auto m = maxca_spec(3);
    const FieldState s = init_state(m, {{4, 255}});
    for (CellIndex i = 0; i < 9; ++i)
        CHECK(s.octets()[i] == (i == 4 ? 255 : 0));

    CHECK(code_of([&] { init_state(m, {{4, 300}}); }) == ErrorCode::InvalidSeed);
    CHECK(code_of([&] { init_state(m, {{9, 1}}); }) == ErrorCode::InvalidSeed);
    CHECK(code_of([&] { init_state(m, {{0, 1.5}}); }) == ErrorCode::InvalidSeed);
    CHECK(code_of([&] { init_state(v, {{0, std::nan("")}}); }) == ErrorCode::InvalidSeed);
}

TEST_CASE("zero field without source stays zero")
{
    const auto spec = vessel_spec(8, 6);
    VesselParams p = pure_diffusion(0.2, 0.1);
    p.velocity_x = 0.5;
    const FieldState out = step_full(spec, p, init_state(spec, {}));
    CHECK(out.step_index == 1);
    for (double x : out.reals())
        CHECK(x == 0.0);
}

TEST_CASE("impulse diffuses to 0.6 center and 0.1 neighbours")
{
    // Hand evaluation: u' = u + dt*D*(sum of neighbours - 4u) with dt=1, D=0.1.
    const auto spec = vessel_spec(5, 5);
    const FieldState out = step_full(spec, pure_diffusion(0.1, 1.0), init_state(spec, {{12, 1.0}}));
    for (CellIndex i = 0; i < 25; ++i)
    {
        double expected = 0.0;
        if (i == 12)
            expected = 0.6;
        else if (i == 7 || i == 11 || i == 13 || i == 17)
            expected = 0.1;
        CHECK(out.reals()[i] == doctest::Approx(expected).epsilon(1e-15));
        if (expected == 0.0)
            CHECK(out.reals()[i] == 0.0);
    }
}

TEST_CASE("upwind advection moves mass downstream only")
{
    const auto spec = vessel_spec(5, 5);
    VesselParams p;
    p.velocity_x = 0.5;
    p.dt = 1.0;
    const FieldState out = step_full(spec, p, init_state(spec, {{12, 1.0}}));
    CHECK(out.reals()[12] == doctest::Approx(0.5));
    CHECK(out.reals()[13] == doctest::Approx(0.5));
    CHECK(out.reals()[11] == 0.0);
}

TEST_CASE("pulsatile source follows amp*(1+sin(2 pi step/period))")
{
    const auto spec = vessel_spec(3, 3);
    VesselParams p;
    p.source_cells = {4};
    p.source_amp = 2.0;
    p.source_period = 4;
    p.dt = 0.5;
    FieldState s = init_state(spec, {});
    double expected = 0.0;
    for (int k = 0; k < 4; ++k)
    {
        expected += 0.5 * 2.0 * (1.0 + std::sin(2.0 * M_PI * k / 4.0));
        s = step_full(spec, p, s);
        CHECK(s.reals()[4] == doctest::Approx(expected));
        CHECK(s.reals()[0] == 0.0);
    }
}

TEST_CASE("maxca spreads a seed into a plus")
{
    const auto spec = maxca_spec(3);
    const FieldState out = step_full(spec, MaxcaParams{}, init_state(spec, {{4, 255}}));
    const std::vector<std::uint8_t> expected = {0, 255, 0, 255, 255, 255, 0, 255, 0};
    CHECK(out.octets() == expected);
}

TEST_CASE("stability bounds are enforced")
{
    const auto spec = vessel_spec(4, 4);
    CHECK(code_of([&] { check_params(spec, pure_diffusion(1.0, 0.5)); }) == ErrorCode::UnstableParams);
    VesselParams fast;
    fast.velocity_x = 8.0;
    fast.velocity_y = 3.0;
    fast.dt = 0.1;
    CHECK(code_of([&] { check_params(spec, fast); }) == ErrorCode::UnstableParams);
    CHECK_NOTHROW(check_params(spec, pure_diffusion(0.25, 1.0)));
    VesselParams bad = pure_diffusion(0.1, 0.1);
    bad.source_cells = {16};
    CHECK(code_of([&] { check_params(spec, bad); }) == ErrorCode::InvalidParams);
    CHECK(code_of([&] { check_params(spec, MaxcaParams{}); }) == ErrorCode::InvalidParams);
}

TEST_CASE("overflow to infinity is a numeric fault")
{
    const auto spec = vessel_spec(3, 3);
    VesselParams p;
    p.source_cells = {4};
    p.source_amp = 1e308;
    p.source_period = 4;
    p.dt = 1.0;
    FieldState s = step_full(spec, p, init_state(spec, {}));
    CHECK(code_of([&] { step_full(spec, p, s); }) == ErrorCode::NumericFault);
}

TEST_CASE("incremental: stationary input recomputes nothing")
{
    const auto spec = vessel_spec(6, 6);
    const FieldState s = init_state(spec, {});
    const IncrementalStep r = step_incremental(spec, pure_diffusion(0.1, 0.1), s, {});
    CHECK(r.dirty.empty());
    CHECK(r.recomputed == 0);
    CHECK(same_bits(r.state, step_full(spec, pure_diffusion(0.1, 0.1), s)));
}

TEST_CASE("incremental: maxca seed recomputes its stencil only")
{
    const auto spec = maxca_spec(3);
    const FieldState s = init_state(spec, {{4, 255}});
    const IncrementalStep r = step_incremental(spec, MaxcaParams{}, s, {4});
    CHECK(r.recomputed == 5);
    CHECK(r.dirty == DirtySet{1, 3, 5, 7});
    CHECK(same_bits(r.state, step_full(spec, MaxcaParams{}, s)));
}

TEST_CASE("incremental equals full on random localized vesselgrid runs")
{
    std::mt19937_64 rng(1234);
    for (int trial = 0; trial < 20; ++trial)
    {
        const std::size_t w = 8 + rng() % 24;
        const std::size_t h = 8 + rng() % 24;
        const auto spec = vessel_spec(w, h, 0.5 + (rng() % 4) * 0.25);
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        VesselParams p;
        p.dt = 0.05;
        p.diffusion = std::abs(unit(rng)) * 0.9;
        p.velocity_x = unit(rng);
        p.velocity_y = unit(rng);
        p.source_period = 1 + static_cast<std::int64_t>(rng() % 12);
        p.source_amp = (trial % 3 == 0) ? 0.0 : std::abs(unit(rng));
        if (p.source_amp > 0.0)
            p.source_cells = {(rng() % h) * w + rng() % w};
        check_params(spec, p);

        std::map<CellIndex, double> seeds;
        for (int k = 0; k < 3; ++k)
            seeds[(rng() % h) * w + rng() % w] = unit(rng);
        FieldState prev = init_state(spec, seeds);
        DirtySet dirty = all_cells(spec);
        for (int step = 0; step < 40; ++step)
        {
            const FieldState full = step_full(spec, p, prev);
            const IncrementalStep inc = step_incremental(spec, p, prev, dirty);
            REQUIRE(same_bits(inc.state, full));
            REQUIRE(inc.state.step_index == full.step_index);
            REQUIRE(inc.dirty == diff_cells(prev, full));
            prev = full;
            dirty = inc.dirty;
        }
    }
}

TEST_CASE("incremental equals full on random maxca runs")
{
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 20; ++trial)
    {
        const auto spec = maxca_spec(4 + rng() % 20);
        std::map<CellIndex, double> seeds;
        for (int k = 0; k < 4; ++k)
            seeds[rng() % spec.cell_count()] = static_cast<double>(rng() % 256);
        FieldState prev = init_state(spec, seeds);
        DirtySet dirty = all_cells(spec);
        for (int step = 0; step < 30; ++step)
        {
            const FieldState full = step_full(spec, MaxcaParams{}, prev);
            const IncrementalStep inc = step_incremental(spec, MaxcaParams{}, prev, dirty);
            REQUIRE(same_bits(inc.state, full));
            REQUIRE(inc.dirty == diff_cells(prev, full));
            for (CellIndex i = 0; i < full.size(); ++i)
                REQUIRE(full.octets()[i] >= prev.octets()[i]);
            prev = full;
            dirty = inc.dirty;
        }
    }
}

TEST_CASE("diffusion with no-flux edges conserves the total")
{
    const auto spec = vessel_spec(17, 13);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::map<CellIndex, double> seeds;
    for (CellIndex i = 0; i < spec.cell_count(); ++i)
        seeds[i] = unit(rng);
    FieldState s = init_state(spec, seeds);
    const VesselParams p = pure_diffusion(0.24, 1.0);
    auto total = [](const FieldState &f) { return std::accumulate(f.reals().begin(), f.reals().end(), 0.0); };
    for (int k = 0; k < 200; ++k)
    {
        const double before = total(s);
        s = step_full(spec, p, s);
        CHECK(std::abs(total(s) - before) <= 1e-12 * std::abs(before));
    }
}

TEST_CASE("maxca saturates within 2(N-1) steps from a single seed")
{
    for (std::size_t n : {2u, 5u, 16u})
    {
        for (CellIndex seed : {CellIndex{0}, CellIndex{n * n - 1}, CellIndex{(n / 2) * n + n / 3}})
        {
            const auto spec = maxca_spec(n);
            FieldState s = init_state(spec, {{seed, 255}});
            const FieldState full = init_state(spec, [&] {
                std::map<CellIndex, double> all;
                for (CellIndex i = 0; i < n * n; ++i)
                    all[i] = 255;
                return all;
            }());
            s = run_linear(spec, MaxcaParams{}, s, static_cast<std::int64_t>(2 * (n - 1)));
            CHECK(same_bits(s, full));
            CHECK(same_bits(step_full(spec, MaxcaParams{}, full), full));
        }
    }
}

TEST_CASE("canonical bytes: length, determinism, signed zero")
{
    const auto spec = vessel_spec(5, 5);
    FieldState a = init_state(spec, {{3, 0.25}});
    FieldState b = init_state(spec, {{3, 0.25}});
    CHECK(canonical_bytes(spec, a).size() == 200);
    CHECK(canonical_bytes(spec, a) == canonical_bytes(spec, b));
    b.reals()[7] = -0.0;
    CHECK(canonical_bytes(spec, a) != canonical_bytes(spec, b));
    CHECK_FALSE(same_bits(a, b));
    CHECK(diff_cells(a, b) == DirtySet{7});

    const auto bytes = canonical_bytes(spec, a);
    CHECK(same_bits(state_from_bytes(spec, 0, bytes.data(), bytes.size()), a));
    // little-endian binary64 of 0.25 is 00 00 00 00 00 00 d0 3f
    CHECK(bytes[3 * 8 + 7] == 0x3f);
    CHECK(bytes[3 * 8 + 6] == 0xd0);

    const auto m = maxca_spec(4);
    CHECK(canonical_bytes(m, init_state(m, {{1, 7}})).size() == 16);
}

TEST_CASE("step_full is deterministic")
{
    const auto spec = vessel_spec(20, 20);
    const auto p = demo_params(20, 20);
    const FieldState a = run_linear(spec, p, init_state(spec, {}), 30);
    const FieldState b = run_linear(spec, p, init_state(spec, {}), 30);
    CHECK(canonical_bytes(spec, a) == canonical_bytes(spec, b));
}

TEST_CASE("parameter change footprint")
{
    const auto spec = vessel_spec(8, 8);
    VesselParams a = demo_params(8, 8);
    VesselParams b = a;
    b.source_amp = 3.0;
    CHECK(parameter_change_footprint(spec, a, b) == std::optional<DirtySet>(a.source_cells));
    b = a;
    b.source_cells = {0};
    auto fp = parameter_change_footprint(spec, a, b);
    REQUIRE(fp);
    CHECK(fp->size() == 10);
    b = a;
    b.diffusion = 0.1;
    CHECK_FALSE(parameter_change_footprint(spec, a, b).has_value());
    CHECK(parameter_change_footprint(spec, a, a) == std::optional<DirtySet>(DirtySet{}));
}
