#include "genomebench/mcq.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <regex>
#include <sstream>

namespace genomebench::mcq {

namespace {

const std::regex kEncodedAnswer(
    "\\s*<explanation>([\\s\\S]*?)</explanation>\\s*<answer>([\\s\\S]*?)</answer>\\s*");

std::string stable_item_id(const std::string& question, std::span<const std::string> options) {
    std::array<std::string, 5> sorted;
    std::copy(options.begin(), options.end(), sorted.begin());
    std::sort(sorted.begin(), sorted.end());
    std::uint64_t h = fnv1a64(question);
    for (const std::string& option : sorted) {
        h = fnv1a64("\x1e", h);
        h = fnv1a64(option, h);
    }
    return "q" + hex64(h);
}

}  // namespace

std::string McqItem::question_prompt() const {
    const std::size_t pos = question_text.find(kOptionsMarker);
    if (pos == std::string::npos) return question_text;
    std::string prompt = question_text.substr(0, pos);
    while (!prompt.empty() && (prompt.back() == '\n' || prompt.back() == '\r')) prompt.pop_back();
    return prompt;
}

McqItem assemble_mcq(const std::string& question, const OptionSet& opts,
                     const std::string& explanation, std::uint64_t seed) {
    if (opts.correct_index < 0 || opts.correct_index > 4) {
        throw Error("InvalidOptionSet", "correct_index out of range");
    }

    McqItem item;
    item.options = opts.options;
    item.explanation = explanation;

    // Track the gold option's position through the swaps.
    int goldPos = opts.correct_index;
    std::mt19937_64 gen(seed);
    MtDraw draw{gen};
    for (std::size_t i = 0; i + 1 < item.options.size(); ++i) {
        const std::uint64_t offset = draw(static_cast<std::uint64_t>(item.options.size() - i));
        const std::size_t j = i + static_cast<std::size_t>(offset);
        std::swap(item.options[i], item.options[j]);
        if (goldPos == static_cast<int>(i)) {
            goldPos = static_cast<int>(j);
        } else if (goldPos == static_cast<int>(j)) {
            goldPos = static_cast<int>(i);
        }
    }
    item.correct_label = static_cast<char>('a' + goldPos);

    std::ostringstream text;
    text << question << '\n' << kOptionsMarker << '\n';
    for (std::size_t i = 0; i < item.options.size(); ++i) {
        text << static_cast<char>('a' + i) << ". " << item.options[i];
        if (i + 1 < item.options.size()) text << '\n';
    }
    item.question_text = text.str();
    item.id = stable_item_id(question, item.options);
    return item;
}

std::string encode_answer(const std::string& explanation, char label) {
    if (label < 'a' || label > 'e') throw InvalidLabel(label);
    return "<explanation>" + explanation + "</explanation> <answer>" + label + "</answer>";
}

std::pair<std::string, char> decode_answer(std::string_view encoded) {
    std::match_results<std::string_view::const_iterator> match;
    if (!std::regex_match(encoded.begin(), encoded.end(), match, kEncodedAnswer)) {
        throw MissingTags();
    }
    const std::string inner = trim(match[2].str());
    if (inner.size() != 1) throw BadLabel(inner);
    const char label = static_cast<char>(std::tolower(static_cast<unsigned char>(inner[0])));
    if (label < 'a' || label > 'e') throw BadLabel(inner);
    return {match[1].str(), label};
}

nlohmann::json item_to_json(const McqItem& item) {
    nlohmann::json j{
        {"id", item.id},
        {"question", item.question_text},
        {"options", item.options},
        {"correct_label", std::string(1, item.correct_label)},
        {"explanation", item.explanation},
        {"category", nullptr},
        {"difficulty", nullptr},
        {"split", nullptr},
    };
    if (item.category) j["category"] = std::string(category_name(*item.category));
    if (item.difficulty) j["difficulty"] = std::string(difficulty_name(*item.difficulty));
    if (item.split) j["split"] = std::string(split_name(*item.split));
    return j;
}

McqItem item_from_json(const nlohmann::json& j, int line) {
    const auto require = [&](const char* field) -> const nlohmann::json& {
        auto it = j.find(field);
        if (it == j.end()) throw SchemaViolation(line, std::string("missing field \"") + field + "\"");
        return *it;
    };

    McqItem item;
    if (!require("id").is_string()) throw SchemaViolation(line, "\"id\" must be a string");
    item.id = j["id"].get<std::string>();
    if (!require("question").is_string()) throw SchemaViolation(line, "\"question\" must be a string");
    item.question_text = j["question"].get<std::string>();

    const nlohmann::json& options = require("options");
    if (!options.is_array() || options.size() != 5) {
        throw SchemaViolation(line, "\"options\" must be an array of 5 strings");
    }
    for (std::size_t i = 0; i < 5; ++i) {
        if (!options[i].is_string()) throw SchemaViolation(line, "\"options\" must hold strings");
        item.options[i] = options[i].get<std::string>();
    }

    const nlohmann::json& label = require("correct_label");
    const std::string labelText = label.is_string() ? label.get<std::string>() : std::string();
    if (labelText.size() != 1 || labelText[0] < 'a' || labelText[0] > 'e') {
        throw SchemaViolation(line, "\"correct_label\" must be one of a-e");
    }
    item.correct_label = labelText[0];

    if (!require("explanation").is_string()) {
        throw SchemaViolation(line, "\"explanation\" must be a string");
    }
    item.explanation = j["explanation"].get<std::string>();

    if (j.contains("category") && !j["category"].is_null()) {
        const auto parsed = parse_category(j["category"].get<std::string>());
        if (!parsed) throw SchemaViolation(line, "unknown category");
        item.category = parsed;
    }
    if (j.contains("difficulty") && !j["difficulty"].is_null()) {
        const auto parsed = parse_difficulty(j["difficulty"].get<std::string>());
        if (!parsed) throw SchemaViolation(line, "unknown difficulty");
        item.difficulty = parsed;
    }
    if (j.contains("split") && !j["split"].is_null()) {
        const auto parsed = parse_split(j["split"].get<std::string>());
        if (!parsed) throw SchemaViolation(line, "unknown split");
        item.split = parsed;
    }
    return item;
}

void write_items(const std::filesystem::path& path, std::span<const McqItem> items) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("IoError", "cannot write " + path.string());
    for (const McqItem& item : items) {
        out << item_to_json(item).dump() << '\n';
    }
    if (!out) throw Error("IoError", "short write to " + path.string());
}

std::vector<McqItem> read_items(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("IoError", "cannot open " + path.string());
    std::vector<McqItem> items;
    std::string line;
    int lineNumber = 0;
    while (std::getline(in, line)) {
        ++lineNumber;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw SchemaViolation(lineNumber, std::string("invalid JSON: ") + e.what());
        }
        items.push_back(item_from_json(j, lineNumber));
    }
    return items;
}

}  // namespace genomebench::mcq
