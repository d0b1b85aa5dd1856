#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

namespace genomebench {

// Base class for all domain errors. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

// 64-bit FNV-1a. Used for thread/item ids and hashed text features; must be
// stable across platforms and runs, which std::hash does not guarantee.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t value);

// ---- text helpers ----

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

// Lowercased alphanumeric word tokens ("µg" style unicode is kept as-is byte-wise).
std::vector<std::string> word_tokens(std::string_view text);

// Jaccard similarity of two sets of strings; 1.0 when both are empty.
double jaccard(const std::unordered_set<std::string>& a, const std::unordered_set<std::string>& b);

// Token-level Jaccard on lowercased word sets.
double token_jaccard(std::string_view a, std::string_view b);

bool starts_with(std::string_view s, std::string_view prefix);
bool contains_ci(std::string_view haystack, std::string_view needle);

std::vector<std::string> split_lines(std::string_view text);

// ---- deterministic shuffling ----
//
// Forward Fisher-Yates. `draw(bound)` must return a value in [0, bound); the
// identity permutation corresponds to every draw returning 0. Kept template'd
// so tests can inject fixed draw sequences.
template <typename Draw, typename T>
void seeded_shuffle(std::span<T> values, Draw&& draw) {
    if (values.size() < 2) return;
    for (std::size_t i = 0; i + 1 < values.size(); ++i) {
        const std::uint64_t offset = draw(static_cast<std::uint64_t>(values.size() - i));
        std::swap(values[i], values[i + static_cast<std::size_t>(offset)]);
    }
}

// Bounded draw from mt19937_64 by modulo. uniform_int_distribution is
// implementation-defined, so it cannot back reproducible artifacts.
struct MtDraw {
    std::mt19937_64& gen;
    std::uint64_t operator()(std::uint64_t bound) { return gen() % bound; }
};

// Shuffled index order for n elements under the given seed.
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed);

// ---- file helpers ----

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view content);

}  // namespace genomebench
