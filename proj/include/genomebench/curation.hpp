#pragma once

#include <filesystem>
#include <regex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "genomebench/common.hpp"
#include "genomebench/llm_bridge.hpp"
#include "genomebench/mcq.hpp"
#include "genomebench/taxonomy.hpp"
#include "json.hpp"

namespace genomebench::curation {

// Configurable keyword/pattern rules for category assignment, difficulty
// scoring, and low-quality filtering. Ships as a versioned JSON asset; the
// category word lists are ours (the source material names the categories and
// signals, not the lists).
struct KeywordTable {
    struct CategoryRule {
        Category category;
        std::vector<std::string> patterns;  // lowercase regexes, matched on lowercased text
    };

    int version = 1;
    std::vector<CategoryRule> categories;  // ordered; first match wins
    int length_medium = 30;                // word-count threshold L_med
    int length_hard = 60;                  // word-count threshold L_hard
    std::vector<std::string> conditional_patterns;
    std::vector<std::string> uncertainty_patterns;
    std::vector<std::string> vague_patterns;  // low-quality pleas
    int min_question_words = 6;

    static KeywordTable from_json(const nlohmann::json& j);
    static KeywordTable load(const std::filesystem::path& path);
    nlohmann::json to_json() const;

    const std::vector<std::regex>& compiled(const std::vector<std::string>& patterns) const;

private:
    mutable std::vector<std::pair<const std::vector<std::string>*, std::vector<std::regex>>> cache_;
};

struct CategoryAssignment {
    Category category = Category::PracticalLabLogistics;
    bool fallback = false;  // no pattern matched; default category applied
};

CategoryAssignment assign_category(const std::string& question, const KeywordTable& table);

// score = [wc > L_med] + [wc > L_hard] + one per matching conditional pattern
//       + one per matching uncertainty pattern; 0 -> Easy, 1-2 -> Medium, >=3 -> Hard.
int difficulty_score(const std::string& question, const KeywordTable& table);
Difficulty assign_difficulty(const std::string& question, const KeywordTable& table);

struct UnansweredResult {
    std::vector<bridge::QaTriple> kept;
    std::vector<bridge::QaTriple> dropped;
};

// Removes triples whose answer is empty, a bare confirmation, or contains a
// no-answer phrase ("no answer", "unanswered", "no response").
UnansweredResult drop_unanswered(std::span<const bridge::QaTriple> triples);

struct QualityDrop {
    mcq::McqItem item;
    std::string rule;  // which configured rule fired
};

struct QualityResult {
    std::vector<mcq::McqItem> kept;
    std::vector<QualityDrop> dropped;
};

QualityResult drop_low_quality(std::span<const mcq::McqItem> items, const KeywordTable& table);

struct DedupResult {
    std::vector<mcq::McqItem> kept;                      // stable input order
    std::vector<std::vector<std::string>> duplicate_groups;  // ids, groups of size >= 2
};

// Groups items whose normalized question 3-gram Jaccard similarity reaches
// the threshold; keeps the lexicographically-smallest id per group.
DedupResult near_dedup(std::span<const mcq::McqItem> items, double threshold = 0.9);

// Word-trigram shingles of the lowercased alphanumeric tokens; questions
// shorter than 3 tokens collapse to a single whole-text shingle.
std::unordered_set<std::string> question_shingles(const std::string& question);

struct SplitResult {
    std::vector<mcq::McqItem> train;
    std::vector<mcq::McqItem> test;
};

// Seeded uniform shuffle, then floor(test_fraction * N) items become the test
// side; both sides keep the original relative order and get their split tag.
SplitResult split_dataset(std::span<const mcq::McqItem> items, double test_fraction,
                          std::uint64_t seed);

}  // namespace genomebench::curation
