#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "genomebench/common.hpp"
#include "genomebench/taxonomy.hpp"
#include "json.hpp"

namespace genomebench::mcq {

class InvalidLabel : public Error {
public:
    explicit InvalidLabel(char label)
        : Error("InvalidLabel", std::string("label must be a-e, got '") + label + "'") {}
};

class MissingTags : public Error {
public:
    MissingTags() : Error("MissingTags", "expected <explanation> and <answer> tags") {}
};

class BadLabel : public Error {
public:
    explicit BadLabel(const std::string& content)
        : Error("BadLabel", "answer tag holds '" + content + "', not a single a-e letter") {}
};

class SchemaViolation : public Error {
public:
    SchemaViolation(int line, const std::string& message)
        : Error("SchemaViolation", "line " + std::to_string(line) + ": " + message), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

// Five distractor+answer texts with the gold option's index.
struct OptionSet {
    std::array<std::string, 5> options;
    int correct_index = 0;
};

inline constexpr std::string_view kOptionsMarker = "Please choose one of the following options:";

struct McqItem {
    std::string id;
    std::string question_text;  // prompt plus the rendered a.-e. option lines
    std::array<std::string, 5> options;
    char correct_label = 'a';
    std::string explanation;
    std::optional<Category> category;
    std::optional<Difficulty> difficulty;
    std::optional<Split> split;

    // Text before the options marker; what dedup and featurization operate on.
    std::string question_prompt() const;
};

// Seeded uniform shuffle of the five options with label tracking: the gold
// option keeps its text and correct_label names its post-shuffle position.
McqItem assemble_mcq(const std::string& question, const OptionSet& opts,
                     const std::string& explanation, std::uint64_t seed);

// "<explanation>" + explanation + "</explanation> <answer>" + label + "</answer>"
std::string encode_answer(const std::string& explanation, char label);

// Inverse of encode_answer on its image; tolerant of surrounding whitespace only.
std::pair<std::string, char> decode_answer(std::string_view encoded);

nlohmann::json item_to_json(const McqItem& item);
McqItem item_from_json(const nlohmann::json& j, int line = 0);

void write_items(const std::filesystem::path& path, std::span<const McqItem> items);
std::vector<McqItem> read_items(const std::filesystem::path& path);

}  // namespace genomebench::mcq
