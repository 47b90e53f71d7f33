#pragma once

#include <cstdint>
#include <iostream>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace bact
{

class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Raised when a config or argument violates a documented invariant.
class ValidationError : public Error
{
public:
    using Error::Error;
};

using Rng = std::mt19937_64;

/// Closed interval of 1-based frame indices.
struct Interval
{
    int lo = 1;
    int hi = 1;

    int length() const { return hi >= lo ? hi - lo + 1 : 0; }
    bool contains(int t) const { return t >= lo && t <= hi; }
    friend bool operator==(const Interval&, const Interval&) = default;
};

namespace detail
{

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_string(std::string_view s)
{
    // FNV-1a
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline bool& quiet_flag()
{
    static bool quiet = false;
    return quiet;
}

} // namespace detail

/// Derives an independent stream seed from a base seed and any number of
/// integer or string tags. Order of tags matters.
inline std::uint64_t derive_seed(std::uint64_t base) { return detail::splitmix64(base); }

template<typename... Tags>
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, Tags... rest);

template<typename... Tags>
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag, Tags... rest)
{
    return derive_seed(detail::splitmix64(base ^ detail::splitmix64(tag + 0x632be59bd9b4e019ULL)), rest...);
}

template<typename... Tags>
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, Tags... rest)
{
    return derive_seed(base, detail::hash_string(tag), rest...);
}

inline void set_quiet(bool quiet) { detail::quiet_flag() = quiet; }

inline void warn(std::string_view msg)
{
    if (!detail::quiet_flag())
        std::clog << "[bact] warning: " << msg << '\n';
}

inline void require(bool cond, const std::string& msg)
{
    if (!cond)
        throw ValidationError(msg);
}

} // namespace bact
