#include "doctest.h"

#include <filesystem>

#include "genomebench/common.hpp"
#include "genomebench/prompts.hpp"

namespace gb = genomebench;

TEST_CASE("fnv1a64 is stable across calls and inputs") {
    CHECK(gb::fnv1a64("abc") == gb::fnv1a64("abc"));
    CHECK(gb::fnv1a64("abc") != gb::fnv1a64("abd"));
    CHECK(gb::hex64(gb::fnv1a64("abc")).size() == 16);
}

TEST_CASE("text helpers") {
    CHECK(gb::to_lower("Re: HELP") == "re: help");
    CHECK(gb::trim("  x \n") == "x");
    CHECK(gb::trim("") == "");
    CHECK(gb::word_tokens("Use 2 ug, please!") == std::vector<std::string>{"use", "2", "ug", "please"});
    CHECK(gb::contains_ci("No Answer given", "no answer"));
    CHECK_FALSE(gb::contains_ci("answered", "no answer"));
}

TEST_CASE("jaccard") {
    std::unordered_set<std::string> a{"x", "y", "z"};
    std::unordered_set<std::string> b{"x", "y"};
    CHECK(gb::jaccard(a, b) == doctest::Approx(2.0 / 3.0));
    CHECK(gb::jaccard({}, {}) == 1.0);
    CHECK(gb::token_jaccard("Use fresh competent cells today", "use fresh competent cells") ==
          doctest::Approx(0.8));
}

TEST_CASE("seeded_shuffle identity under all-zero draws") {
    std::vector<int> values{1, 2, 3, 4, 5};
    gb::seeded_shuffle(std::span<int>(values), [](std::uint64_t) { return std::uint64_t{0}; });
    CHECK(values == std::vector<int>{1, 2, 3, 4, 5});
}

TEST_CASE("shuffled_indices is a seed-deterministic permutation") {
    const auto a = gb::shuffled_indices(100, 7);
    const auto b = gb::shuffled_indices(100, 7);
    const auto c = gb::shuffled_indices(100, 8);
    CHECK(a == b);
    CHECK(a != c);
    std::vector<bool> seen(100, false);
    for (std::size_t index : a) seen[index] = true;
    CHECK(std::count(seen.begin(), seen.end(), true) == 100);
}

TEST_CASE("shipped prompt assets stay in sync with the compiled defaults") {
    const std::filesystem::path dir = GB_ASSET_DIR;
    const auto matches = [&](const char* file, std::string_view constant) {
        return gb::trim(gb::read_text_file((dir / "prompts" / file).string())) == gb::trim(constant);
    };
    CHECK(matches("extract_triples.txt", gb::prompts::kExtractSystem));
    CHECK(matches("rewrite_question.txt", gb::prompts::kRewriteSystem));
    CHECK(matches("generate_options.txt", gb::prompts::kOptionsSystem));
    CHECK(matches("eval_system.txt", gb::prompts::kEvalSystem));
}
