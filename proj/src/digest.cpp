#include "branchsim/digest.hpp"

#include "branchsim/error.hpp"

#include <openssl/evp.h>

namespace branchsim
{
    std::string Digest::hex() const
    {
        static constexpr char digits[] = "0123456789abcdef";
        std::string out;
        out.reserve(64);
        for (std::uint8_t b : bytes)
        {
            out.push_back(digits[b >> 4]);
            out.push_back(digits[b & 0xf]);
        }
        return out;
    }

    Digest Digest::from_hex(std::string_view hex)
    {
        auto nibble = [](char c) -> int
        {
            if (c >= '0' && c <= '9')
                return c - '0';
            if (c >= 'a' && c <= 'f')
                return c - 'a' + 10;
            if (c >= 'A' && c <= 'F')
                return c - 'A' + 10;
            return -1;
        };
        Digest d;
        if (hex.size() != 64)
        {
            fail(ErrorCode::InvalidConfig, "digest must be 64 hex characters");
        }
        for (std::size_t i = 0; i < 32; ++i)
        {
            const int hi = nibble(hex[2 * i]);
            const int lo = nibble(hex[2 * i + 1]);
            if (hi < 0 || lo < 0)
            {
                fail(ErrorCode::InvalidConfig, "digest contains a non-hex character");
            }
            d.bytes[i] = static_cast<std::uint8_t>((hi << 4) | lo);
        }
        return d;
    }

    Hasher::Hasher() : ctx_(EVP_MD_CTX_new())
    {
        EVP_DigestInit_ex(static_cast<EVP_MD_CTX *>(ctx_), EVP_sha256(), nullptr);
    }

    Hasher::~Hasher()
    {
        EVP_MD_CTX_free(static_cast<EVP_MD_CTX *>(ctx_));
    }

    Hasher &Hasher::update(std::span<const std::uint8_t> data)
    {
        EVP_DigestUpdate(static_cast<EVP_MD_CTX *>(ctx_), data.data(), data.size());
        return *this;
    }

    Hasher &Hasher::update(std::string_view text)
    {
        EVP_DigestUpdate(static_cast<EVP_MD_CTX *>(ctx_), text.data(), text.size());
        return *this;
    }

    Digest Hasher::finish()
    {
        Digest d;
        unsigned int len = 0;
        EVP_DigestFinal_ex(static_cast<EVP_MD_CTX *>(ctx_), d.bytes.data(), &len);
        return d;
    }

    Digest sha256(std::span<const std::uint8_t> data)
    {
        return Hasher().update(data).finish();
    }

    Digest sha256(std::string_view text)
    {
        return Hasher().update(text).finish();
    }
}
