#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <variant>
#include <vector>

namespace branchsim
{
    using Bytes = std::vector<std::uint8_t>;
    using CellIndex = std::size_t;

    // Ascending, duplicate-free cell indices.
    using DirtySet = std::vector<CellIndex>;

    enum class SimulatorId : std::uint8_t
    {
        vesselgrid,
        maxca,
    };

    struct SimulatorSpec
    {
        SimulatorId simulator = SimulatorId::vesselgrid;
        std::size_t width = 0;
        std::size_t height = 0;
        double cell_size_h = 1.0;

        std::size_t cell_count() const noexcept { return width * height; }

        // Declared per simulator: vesselgrid has a pulsatile (step-dependent)
        // source, maxca does not depend on the absolute step.
        bool time_invariant() const noexcept { return simulator == SimulatorId::maxca; }

        // Bytes per cell in canonical form.
        std::size_t value_size() const noexcept { return simulator == SimulatorId::vesselgrid ? 8 : 1; }

        bool operator==(const SimulatorSpec &) const = default;
    };

    void validate_spec(const SimulatorSpec &spec);

    struct VesselParams
    {
        double diffusion = 0.0;
        double velocity_x = 0.0;
        double velocity_y = 0.0;
        double dt = 0.1;
        std::vector<CellIndex> source_cells; // kept sorted and unique
        double source_amp = 0.0;
        std::int64_t source_period = 1;

        bool operator==(const VesselParams &) const = default;
    };

    struct MaxcaParams
    {
        bool operator==(const MaxcaParams &) const = default;
    };

    using ParamSet = std::variant<VesselParams, MaxcaParams>;

    // Default parameters matching the simulator kind.
    ParamSet default_params(const SimulatorSpec &spec);

    // Throws InvalidParams for malformed values (wrong simulator kind, NaN, bad
    // source cells) and UnstableParams when the explicit-scheme bounds
    // dt*D/h^2 <= 1/4 and dt*(|vx|+|vy|)/h <= 1 are violated.
    void check_params(const SimulatorSpec &spec, const ParamSet &params);

    // Partial ParamSet plus an optional state perturbation applied at a branch
    // start (spatial branching). Perturbations never enter effective params.
    struct ParamOverrides
    {
        std::optional<double> diffusion;
        std::optional<double> velocity_x;
        std::optional<double> velocity_y;
        std::optional<double> dt;
        std::optional<std::vector<CellIndex>> source_cells;
        std::optional<double> source_amp;
        std::optional<std::int64_t> source_period;
        std::map<CellIndex, double> perturbation;

        bool has_param_changes() const noexcept;
        bool empty() const noexcept { return !has_param_changes() && perturbation.empty(); }

        bool operator==(const ParamOverrides &) const = default;
    };

    ParamSet apply_overrides(const SimulatorSpec &spec, const ParamSet &base, const ParamOverrides &overrides);

    // Cells whose update rule differs between two parameter sets; nullopt means
    // every cell (a global coefficient changed).
    std::optional<DirtySet> parameter_change_footprint(const SimulatorSpec &spec, const ParamSet &before,
                                                       const ParamSet &after);

    struct FieldState
    {
        std::int64_t step_index = 0;
        std::variant<std::vector<double>, std::vector<std::uint8_t>> cells;

        const std::vector<double> &reals() const { return std::get<std::vector<double>>(cells); }
        std::vector<double> &reals() { return std::get<std::vector<double>>(cells); }
        const std::vector<std::uint8_t> &octets() const { return std::get<std::vector<std::uint8_t>>(cells); }
        std::vector<std::uint8_t> &octets() { return std::get<std::vector<std::uint8_t>>(cells); }

        std::size_t size() const noexcept;
        double value(CellIndex i) const;
    };

    // Bitwise cell comparison (distinguishes -0.0 from 0.0).
    bool same_bits(const FieldState &a, const FieldState &b, CellIndex i);
    bool same_bits(const FieldState &a, const FieldState &b);

    FieldState init_state(const SimulatorSpec &spec, const std::map<CellIndex, double> &seed_cells);

    // Overwrites the listed cells; same domain rules as init_state.
    void apply_perturbation(const SimulatorSpec &spec, FieldState &state, const std::map<CellIndex, double> &cells);

    FieldState step_full(const SimulatorSpec &spec, const ParamSet &params, const FieldState &state);

    struct IncrementalStep
    {
        FieldState state;
        DirtySet dirty;
        std::size_t recomputed = 0;
    };

    // `dirty` must list exactly the cells changed by the previous step under the
    // same parameters. Output is bit-identical to step_full.
    IncrementalStep step_incremental(const SimulatorSpec &spec, const ParamSet &params, const FieldState &state,
                                     const DirtySet &dirty);

    // Cells whose value differs bitwise between two states.
    DirtySet diff_cells(const FieldState &before, const FieldState &after);

    DirtySet all_cells(const SimulatorSpec &spec);

    // Row-major cell values: binary64 little-endian for vesselgrid, one byte per
    // cell for maxca. step_index is not part of the encoding.
    Bytes canonical_bytes(const SimulatorSpec &spec, const FieldState &state);

    // Encodes one cell value exactly as canonical_bytes lays it out.
    void append_cell_bytes(const SimulatorSpec &spec, const FieldState &state, CellIndex i, Bytes &out);

    // Inverse of canonical_bytes.
    FieldState state_from_bytes(const SimulatorSpec &spec, std::int64_t step_index, const std::uint8_t *data,
                                std::size_t size);

    void write_le64(Bytes &out, std::uint64_t v);
    std::uint64_t read_le64(const std::uint8_t *p) noexcept;
}
