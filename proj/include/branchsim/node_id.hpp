#pragma once

#include <cstdint>
#include <string>

namespace branchsim
{
    enum class NodeId : std::uint64_t
    {
    };

    inline std::uint64_t raw(NodeId id) noexcept { return static_cast<std::uint64_t>(id); }
    inline std::string to_string(NodeId id) { return std::to_string(raw(id)); }
}
