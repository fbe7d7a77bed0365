#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace ct::util {

// ---------------------------------------------------------------------------
// Deterministic randomness.
//
// std::mt19937_64 is fully specified by the standard, but the distribution
// adaptors are not. Everything that has to reproduce bit-for-bit across
// platforms draws through these helpers instead.
// ---------------------------------------------------------------------------

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) with 53 bits of randomness.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n). n must be > 0.
std::uint64_t uniform_below(Rng& rng, std::uint64_t n);

/// Standard normal sample via Box-Muller (two uniforms per draw, no caching).
double gaussian(Rng& rng);

/// Fisher-Yates shuffle driven by uniform_below, index order fixed.
template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(uniform_below(rng, i));
        std::swap(items[i - 1], items[j]);
    }
}

/// Mixes a stream index into a base seed (SplitMix64 finalizer).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

// ---------------------------------------------------------------------------
// Strings
// ---------------------------------------------------------------------------

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::vector<std::string> split_words(std::string_view s);  // whitespace runs

/// Stable textual form of a double that parses back to the same bits.
std::string format_double(double v);

// ---------------------------------------------------------------------------
// CSV (comma separated, RFC-ish quoting for fields containing , " or \n)
// ---------------------------------------------------------------------------

std::string csv_escape(std::string_view field);
std::string csv_row(const std::vector<std::string>& fields);
std::vector<std::string> csv_parse_line(std::string_view line);

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

std::string read_text_file(const std::filesystem::path& path);

/// Writes to a sibling temp file and renames over the target.
void atomic_write_file(const std::filesystem::path& path, std::string_view content);

// ---------------------------------------------------------------------------
// Parallel loop: static partition over hardware threads, deterministic
// results as long as the body only writes to its own index.
// ---------------------------------------------------------------------------

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

// 64-bit FNV-1a, used as the weights payload checksum.
std::uint64_t fnv1a64(const void* data, std::size_t size);
std::string to_hex64(std::uint64_t v);

}  // namespace ct::util
