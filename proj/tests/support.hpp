#pragma once

#include "branchsim/sim_core.hpp"
#include "branchsim/snapshot_store.hpp"

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

namespace testing_support
{
    using namespace branchsim;

    inline SimulatorSpec vessel_spec(std::size_t w, std::size_t h, double cell = 1.0)
    {
        return SimulatorSpec{SimulatorId::vesselgrid, w, h, cell};
    }

    inline SimulatorSpec maxca_spec(std::size_t n)
    {
        return SimulatorSpec{SimulatorId::maxca, n, n, 1.0};
    }

    inline std::vector<CellIndex> square(std::size_t width, std::size_t cx, std::size_t cy, std::size_t half)
    {
        std::vector<CellIndex> out;
        for (std::size_t y = cy - half; y <= cy + half; ++y)
            for (std::size_t x = cx - half; x <= cx + half; ++x)
                out.push_back(y * width + x);
        return out;
    }

    // 3x3 pulsing source in the middle of the grid, gentle drift.
    inline VesselParams demo_params(std::size_t width, std::size_t height)
    {
        VesselParams p;
        p.diffusion = 0.2;
        p.velocity_x = 0.3;
        p.velocity_y = 0.1;
        p.dt = 0.1;
        p.source_cells = square(width, width / 2, height / 2, 1);
        p.source_amp = 1.0;
        p.source_period = 25;
        return p;
    }

    // Fresh, empty directory under the system temp dir.
    inline std::filesystem::path scratch_dir(const std::string &tag)
    {
        static std::atomic<int> counter{0};
        auto dir = std::filesystem::temp_directory_path() /
                   ("branchsim_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(dir);
        return dir;
    }

    inline FieldState run_linear(const SimulatorSpec &spec, const ParamSet &params, FieldState s, std::int64_t steps)
    {
        for (std::int64_t i = 0; i < steps; ++i)
            s = step_full(spec, params, s);
        return s;
    }
}
