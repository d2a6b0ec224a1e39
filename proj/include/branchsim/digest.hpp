#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace branchsim
{
    inline constexpr std::string_view digest_algorithm_id = "sha256";

    struct Digest
    {
        std::array<std::uint8_t, 32> bytes{};

        std::string hex() const;
        static Digest from_hex(std::string_view hex);

        auto operator<=>(const Digest &) const = default;
    };

    // Streaming SHA-256.
    class Hasher
    {
    public:
        Hasher();
        ~Hasher();
        Hasher(const Hasher &) = delete;
        Hasher &operator=(const Hasher &) = delete;

        Hasher &update(std::span<const std::uint8_t> data);
        Hasher &update(std::string_view text);
        Hasher &update(const Digest &d) { return update(std::span<const std::uint8_t>(d.bytes)); }
        Digest finish();

    private:
        void *ctx_;
    };

    Digest sha256(std::span<const std::uint8_t> data);
    Digest sha256(std::string_view text);
}

template <>
struct std::hash<branchsim::Digest>
{
    std::size_t operator()(const branchsim::Digest &d) const noexcept
    {
        std::size_t h = 0;
        for (int i = 0; i < 8; ++i)
        {
            h = (h << 8) | d.bytes[i];
        }
        return h;
    }
};
