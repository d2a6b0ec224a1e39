#include "branchsim/sim_core.hpp"

#include "branchsim/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <string>

namespace branchsim
{
    namespace
    {
        void require_finite(double v, const char *what)
        {
            if (!std::isfinite(v))
            {
                fail(ErrorCode::InvalidParams, std::string(what) + " must be finite");
            }
        }

        bool is_sorted_unique(const std::vector<CellIndex> &cells)
        {
            return std::adjacent_find(cells.begin(), cells.end(),
                                      [](CellIndex a, CellIndex b) { return a >= b; }) == cells.end();
        }

        double source_forcing(const VesselParams &p, std::int64_t step_index)
        {
            const double phase = 2.0 * std::numbers::pi * static_cast<double>(step_index) /
                                 static_cast<double>(p.source_period);
            return p.source_amp * (1.0 + std::sin(phase));
        }

        struct VesselKernel
        {
            const SimulatorSpec &spec;
            const VesselParams &p;
            const std::vector<double> &in;
            std::vector<std::uint8_t> source_mask;
            double forcing;
            std::int64_t step;
            double inv_h;
            double inv_h2;

            VesselKernel(const SimulatorSpec &s, const VesselParams &params, const FieldState &state)
                : spec(s), p(params), in(state.reals()), source_mask(s.cell_count(), 0),
                  forcing(source_forcing(params, state.step_index)), step(state.step_index), inv_h(1.0 / s.cell_size_h),
                  inv_h2(1.0 / (s.cell_size_h * s.cell_size_h))
            {
                for (CellIndex c : params.source_cells)
                {
                    source_mask[c] = 1;
                }
            }

            double operator()(CellIndex i) const
            {
                const std::size_t w = spec.width;
                const std::size_t x = i % w;
                const std::size_t y = i / w;
                const double u = in[i];
                // Copy-edge boundaries: a missing neighbour mirrors the cell itself.
                const double west = x > 0 ? in[i - 1] : u;
                const double east = x + 1 < w ? in[i + 1] : u;
                const double north = y > 0 ? in[i - w] : u;
                const double south = y + 1 < spec.height ? in[i + w] : u;

                const double laplacian = ((east + west) + (north + south) - 4.0 * u) * inv_h2;

                double advection = 0.0;
                if (p.velocity_x > 0.0)
                {
                    advection += p.velocity_x * (u - west) * inv_h;
                }
                else if (p.velocity_x < 0.0)
                {
                    advection += p.velocity_x * (east - u) * inv_h;
                }
                if (p.velocity_y > 0.0)
                {
                    advection += p.velocity_y * (u - north) * inv_h;
                }
                else if (p.velocity_y < 0.0)
                {
                    advection += p.velocity_y * (south - u) * inv_h;
                }

                const double source = source_mask[i] ? forcing : 0.0;
                const double out = u + p.dt * (p.diffusion * laplacian - advection + source);
                if (!std::isfinite(out))
                {
                    fail(ErrorCode::NumericFault,
                         "non-finite value at cell " + std::to_string(i) + " step " + std::to_string(step));
                }
                return out;
            }
        };

        std::uint8_t maxca_cell(const SimulatorSpec &spec, const std::vector<std::uint8_t> &in, CellIndex i)
        {
            const std::size_t w = spec.width;
            const std::size_t x = i % w;
            const std::size_t y = i / w;
            std::uint8_t m = in[i];
            if (x > 0)
                m = std::max(m, in[i - 1]);
            if (x + 1 < w)
                m = std::max(m, in[i + 1]);
            if (y > 0)
                m = std::max(m, in[i - w]);
            if (y + 1 < spec.height)
                m = std::max(m, in[i + w]);
            return m;
        }

        void check_state(const SimulatorSpec &spec, const FieldState &state)
        {
            const bool kind_ok = spec.simulator == SimulatorId::vesselgrid
                                     ? std::holds_alternative<std::vector<double>>(state.cells)
                                     : std::holds_alternative<std::vector<std::uint8_t>>(state.cells);
            if (!kind_ok || state.size() != spec.cell_count())
            {
                fail(ErrorCode::InvalidSeed, "state does not match simulator spec");
            }
        }

        void check_cell_value(const SimulatorSpec &spec, CellIndex i, double v)
        {
            if (i >= spec.cell_count())
            {
                fail(ErrorCode::InvalidSeed, "cell index " + std::to_string(i) + " out of range");
            }
            if (!std::isfinite(v))
            {
                fail(ErrorCode::InvalidSeed, "non-finite value at cell " + std::to_string(i));
            }
            if (spec.simulator == SimulatorId::maxca && (v < 0.0 || v > 255.0 || v != std::floor(v)))
            {
                fail(ErrorCode::InvalidSeed, "maxca value must be an integer in [0, 255]");
            }
        }
    }

    void validate_spec(const SimulatorSpec &spec)
    {
        if (spec.width < 2 || spec.height < 2)
        {
            fail(ErrorCode::InvalidParams, "grid must be at least 2x2");
        }
        if (!(spec.cell_size_h > 0.0) || !std::isfinite(spec.cell_size_h))
        {
            fail(ErrorCode::InvalidParams, "cell_size_h must be positive and finite");
        }
    }

    ParamSet default_params(const SimulatorSpec &spec)
    {
        if (spec.simulator == SimulatorId::maxca)
        {
            return MaxcaParams{};
        }
        return VesselParams{};
    }

    void check_params(const SimulatorSpec &spec, const ParamSet &params)
    {
        validate_spec(spec);
        if (spec.simulator == SimulatorId::maxca)
        {
            if (!std::holds_alternative<MaxcaParams>(params))
            {
                fail(ErrorCode::InvalidParams, "maxca takes no parameters");
            }
            return;
        }
        if (!std::holds_alternative<VesselParams>(params))
        {
            fail(ErrorCode::InvalidParams, "vesselgrid parameters required");
        }
        const auto &p = std::get<VesselParams>(params);
        require_finite(p.diffusion, "diffusion_D");
        require_finite(p.velocity_x, "velocity_vx");
        require_finite(p.velocity_y, "velocity_vy");
        require_finite(p.dt, "dt");
        require_finite(p.source_amp, "source_amp");
        if (p.diffusion < 0.0)
            fail(ErrorCode::InvalidParams, "diffusion_D must be nonnegative");
        if (!(p.dt > 0.0))
            fail(ErrorCode::InvalidParams, "dt must be positive");
        if (p.source_amp < 0.0)
            fail(ErrorCode::InvalidParams, "source_amp must be nonnegative");
        if (p.source_period <= 0)
            fail(ErrorCode::InvalidParams, "source_period must be positive");
        if (!is_sorted_unique(p.source_cells))
            fail(ErrorCode::InvalidParams, "source_cells must be ascending and unique");
        if (!p.source_cells.empty() && p.source_cells.back() >= spec.cell_count())
            fail(ErrorCode::InvalidParams, "source cell out of range");

        const double h = spec.cell_size_h;
        if (p.dt * p.diffusion / (h * h) > 0.25)
        {
            fail(ErrorCode::UnstableParams, "dt*D/h^2 exceeds 0.25");
        }
        if (p.dt * (std::abs(p.velocity_x) + std::abs(p.velocity_y)) / h > 1.0)
        {
            fail(ErrorCode::UnstableParams, "dt*(|vx|+|vy|)/h exceeds 1");
        }
    }

    bool ParamOverrides::has_param_changes() const noexcept
    {
        return diffusion || velocity_x || velocity_y || dt || source_cells || source_amp || source_period;
    }

    ParamSet apply_overrides(const SimulatorSpec &spec, const ParamSet &base, const ParamOverrides &overrides)
    {
        if (spec.simulator == SimulatorId::maxca)
        {
            if (overrides.has_param_changes())
            {
                fail(ErrorCode::InvalidParams, "maxca takes no parameter overrides");
            }
            return base;
        }
        VesselParams p = std::get<VesselParams>(base);
        if (overrides.diffusion)
            p.diffusion = *overrides.diffusion;
        if (overrides.velocity_x)
            p.velocity_x = *overrides.velocity_x;
        if (overrides.velocity_y)
            p.velocity_y = *overrides.velocity_y;
        if (overrides.dt)
            p.dt = *overrides.dt;
        if (overrides.source_cells)
        {
            p.source_cells = *overrides.source_cells;
            std::sort(p.source_cells.begin(), p.source_cells.end());
            p.source_cells.erase(std::unique(p.source_cells.begin(), p.source_cells.end()), p.source_cells.end());
        }
        if (overrides.source_amp)
            p.source_amp = *overrides.source_amp;
        if (overrides.source_period)
            p.source_period = *overrides.source_period;
        return p;
    }

    std::optional<DirtySet> parameter_change_footprint(const SimulatorSpec &spec, const ParamSet &before,
                                                       const ParamSet &after)
    {
        if (spec.simulator == SimulatorId::maxca)
        {
            return DirtySet{};
        }
        const auto &a = std::get<VesselParams>(before);
        const auto &b = std::get<VesselParams>(after);
        if (a.diffusion != b.diffusion || a.velocity_x != b.velocity_x || a.velocity_y != b.velocity_y ||
            a.dt != b.dt)
        {
            return std::nullopt;
        }
        if (a.source_amp == b.source_amp && a.source_period == b.source_period && a.source_cells == b.source_cells)
        {
            return DirtySet{};
        }
        DirtySet cells;
        std::set_union(a.source_cells.begin(), a.source_cells.end(), b.source_cells.begin(), b.source_cells.end(),
                       std::back_inserter(cells));
        return cells;
    }

    std::size_t FieldState::size() const noexcept
    {
        return std::visit([](const auto &v) { return v.size(); }, cells);
    }

    double FieldState::value(CellIndex i) const
    {
        return std::visit([i](const auto &v) { return static_cast<double>(v.at(i)); }, cells);
    }

    bool same_bits(const FieldState &a, const FieldState &b, CellIndex i)
    {
        if (const auto *ra = std::get_if<std::vector<double>>(&a.cells))
        {
            return std::bit_cast<std::uint64_t>((*ra)[i]) == std::bit_cast<std::uint64_t>(b.reals()[i]);
        }
        return a.octets()[i] == b.octets()[i];
    }

    bool same_bits(const FieldState &a, const FieldState &b)
    {
        if (a.cells.index() != b.cells.index() || a.size() != b.size())
        {
            return false;
        }
        for (CellIndex i = 0; i < a.size(); ++i)
        {
            if (!same_bits(a, b, i))
                return false;
        }
        return true;
    }

    FieldState init_state(const SimulatorSpec &spec, const std::map<CellIndex, double> &seed_cells)
    {
        validate_spec(spec);
        FieldState state;
        if (spec.simulator == SimulatorId::vesselgrid)
        {
            state.cells = std::vector<double>(spec.cell_count(), 0.0);
        }
        else
        {
            state.cells = std::vector<std::uint8_t>(spec.cell_count(), 0);
        }
        apply_perturbation(spec, state, seed_cells);
        return state;
    }

    void apply_perturbation(const SimulatorSpec &spec, FieldState &state, const std::map<CellIndex, double> &cells)
    {
        for (const auto &[i, v] : cells)
        {
            check_cell_value(spec, i, v);
        }
        for (const auto &[i, v] : cells)
        {
            if (spec.simulator == SimulatorId::vesselgrid)
                state.reals()[i] = v;
            else
                state.octets()[i] = static_cast<std::uint8_t>(v);
        }
    }

    FieldState step_full(const SimulatorSpec &spec, const ParamSet &params, const FieldState &state)
    {
        check_params(spec, params);
        check_state(spec, state);
        FieldState next;
        next.step_index = state.step_index + 1;
        const std::size_t n = spec.cell_count();
        if (spec.simulator == SimulatorId::vesselgrid)
        {
            const VesselKernel kernel(spec, std::get<VesselParams>(params), state);
            std::vector<double> out(n);
            for (CellIndex i = 0; i < n; ++i)
            {
                out[i] = kernel(i);
            }
            next.cells = std::move(out);
        }
        else
        {
            const auto &in = state.octets();
            std::vector<std::uint8_t> out(n);
            for (CellIndex i = 0; i < n; ++i)
            {
                out[i] = maxca_cell(spec, in, i);
            }
            next.cells = std::move(out);
        }
        return next;
    }

    IncrementalStep step_incremental(const SimulatorSpec &spec, const ParamSet &params, const FieldState &state,
                                     const DirtySet &dirty)
    {
        check_params(spec, params);
        check_state(spec, state);
        const std::size_t n = spec.cell_count();
        const std::size_t w = spec.width;

        // A cell must be recomputed when any input of its 5-point stencil changed.
        std::vector<std::uint8_t> mark(n, 0);
        for (CellIndex c : dirty)
        {
            if (c >= n)
            {
                fail(ErrorCode::InvalidSeed, "dirty index out of range");
            }
            const std::size_t x = c % w;
            const std::size_t y = c / w;
            mark[c] = 1;
            if (x > 0)
                mark[c - 1] = 1;
            if (x + 1 < w)
                mark[c + 1] = 1;
            if (y > 0)
                mark[c - w] = 1;
            if (y + 1 < spec.height)
                mark[c + w] = 1;
        }
        if (spec.simulator == SimulatorId::vesselgrid)
        {
            const auto &p = std::get<VesselParams>(params);
            const double now = source_forcing(p, state.step_index);
            const double before = source_forcing(p, state.step_index - 1);
            if (std::bit_cast<std::uint64_t>(now) != std::bit_cast<std::uint64_t>(before))
            {
                for (CellIndex c : p.source_cells)
                {
                    mark[c] = 1;
                }
            }
        }

        IncrementalStep result;
        result.state = state;
        result.state.step_index = state.step_index + 1;
        if (spec.simulator == SimulatorId::vesselgrid)
        {
            const VesselKernel kernel(spec, std::get<VesselParams>(params), state);
            auto &out = result.state.reals();
            const auto &in = state.reals();
            for (CellIndex i = 0; i < n; ++i)
            {
                if (!mark[i])
                    continue;
                ++result.recomputed;
                out[i] = kernel(i);
                if (std::bit_cast<std::uint64_t>(out[i]) != std::bit_cast<std::uint64_t>(in[i]))
                {
                    result.dirty.push_back(i);
                }
            }
        }
        else
        {
            auto &out = result.state.octets();
            const auto &in = state.octets();
            for (CellIndex i = 0; i < n; ++i)
            {
                if (!mark[i])
                    continue;
                ++result.recomputed;
                out[i] = maxca_cell(spec, in, i);
                if (out[i] != in[i])
                {
                    result.dirty.push_back(i);
                }
            }
        }
        return result;
    }

    DirtySet diff_cells(const FieldState &before, const FieldState &after)
    {
        DirtySet out;
        for (CellIndex i = 0; i < before.size(); ++i)
        {
            if (!same_bits(before, after, i))
            {
                out.push_back(i);
            }
        }
        return out;
    }

    DirtySet all_cells(const SimulatorSpec &spec)
    {
        DirtySet out(spec.cell_count());
        for (CellIndex i = 0; i < out.size(); ++i)
        {
            out[i] = i;
        }
        return out;
    }

    void write_le64(Bytes &out, std::uint64_t v)
    {
        for (int b = 0; b < 8; ++b)
        {
            out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
        }
    }

    std::uint64_t read_le64(const std::uint8_t *p) noexcept
    {
        std::uint64_t v = 0;
        for (int b = 7; b >= 0; --b)
        {
            v = (v << 8) | p[b];
        }
        return v;
    }

    void append_cell_bytes(const SimulatorSpec &spec, const FieldState &state, CellIndex i, Bytes &out)
    {
        if (spec.simulator == SimulatorId::vesselgrid)
        {
            write_le64(out, std::bit_cast<std::uint64_t>(state.reals()[i]));
        }
        else
        {
            out.push_back(state.octets()[i]);
        }
    }

    Bytes canonical_bytes(const SimulatorSpec &spec, const FieldState &state)
    {
        Bytes out;
        out.reserve(spec.cell_count() * spec.value_size());
        for (CellIndex i = 0; i < spec.cell_count(); ++i)
        {
            append_cell_bytes(spec, state, i, out);
        }
        return out;
    }

    FieldState state_from_bytes(const SimulatorSpec &spec, std::int64_t step_index, const std::uint8_t *data,
                                std::size_t size)
    {
        const std::size_t n = spec.cell_count();
        if (size != n * spec.value_size())
        {
            fail(ErrorCode::CorruptStore, "snapshot payload has wrong length");
        }
        FieldState state;
        state.step_index = step_index;
        if (spec.simulator == SimulatorId::vesselgrid)
        {
            std::vector<double> cells(n);
            for (CellIndex i = 0; i < n; ++i)
            {
                cells[i] = std::bit_cast<double>(read_le64(data + 8 * i));
            }
            state.cells = std::move(cells);
        }
        else
        {
            state.cells = std::vector<std::uint8_t>(data, data + n);
        }
        return state;
    }
}
