#include "genomebench/curation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace genomebench::curation {

namespace {

const std::array<std::string_view, 3> kNoAnswerPhrases = {"no answer", "unanswered", "no response"};

// Short all-filler replies that acknowledge without answering.
const std::unordered_set<std::string> kBareConfirmations = {
    "yes",    "no",     "ok",        "okay",     "sure",   "thanks", "thank you",
    "agreed", "great",  "perfect",   "got it",   "done",   "will do", "sounds good",
    "yes thanks", "ok thanks", "no thanks", "thanks a lot", "thank you very much"};

bool is_bare_confirmation(const std::string& answer) {
    const std::vector<std::string> tokens = word_tokens(answer);
    if (tokens.empty() || tokens.size() > 4) return false;
    std::string joined;
    for (const std::string& token : tokens) {
        if (!joined.empty()) joined.push_back(' ');
        joined += token;
    }
    return kBareConfirmations.count(joined) != 0;
}

struct IndexDsu {
    std::vector<std::size_t> parent;
    explicit IndexDsu(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

bool is_link_only(const std::string& text) {
    bool sawLink = false;
    std::istringstream in(text);
    std::string piece;
    while (in >> piece) {
        if (starts_with(piece, "http://") || starts_with(piece, "https://") ||
            starts_with(piece, "www.")) {
            sawLink = true;
            continue;
        }
        return false;
    }
    return sawLink;
}

}  // namespace

KeywordTable KeywordTable::from_json(const nlohmann::json& j) {
    KeywordTable table;
    table.version = j.value("version", 1);

    if (!j.contains("categories") || !j["categories"].is_array() || j["categories"].empty()) {
        throw Error("InvalidConfig", "keyword table needs a non-empty ordered category list");
    }
    for (const nlohmann::json& entry : j["categories"]) {
        CategoryRule rule;
        const std::string name = entry.at("category").get<std::string>();
        const auto category = parse_category(name);
        if (!category) throw Error("InvalidConfig", "unknown category: " + name);
        rule.category = *category;
        rule.patterns = entry.at("patterns").get<std::vector<std::string>>();
        if (rule.patterns.empty()) {
            throw Error("InvalidConfig", "category " + name + " has no patterns");
        }
        table.categories.push_back(std::move(rule));
    }

    if (j.contains("difficulty")) {
        const nlohmann::json& d = j["difficulty"];
        table.length_medium = d.value("length_medium", table.length_medium);
        table.length_hard = d.value("length_hard", table.length_hard);
        if (d.contains("conditional_patterns")) {
            table.conditional_patterns = d["conditional_patterns"].get<std::vector<std::string>>();
        }
        if (d.contains("uncertainty_patterns")) {
            table.uncertainty_patterns = d["uncertainty_patterns"].get<std::vector<std::string>>();
        }
    }
    if (j.contains("low_quality")) {
        const nlohmann::json& q = j["low_quality"];
        if (q.contains("vague_patterns")) {
            table.vague_patterns = q["vague_patterns"].get<std::vector<std::string>>();
        }
        table.min_question_words = q.value("min_question_words", table.min_question_words);
    }

    // Every pattern must compile now, not at first use.
    table.compiled(table.conditional_patterns);
    table.compiled(table.uncertainty_patterns);
    table.compiled(table.vague_patterns);
    for (const CategoryRule& rule : table.categories) table.compiled(rule.patterns);
    return table;
}

KeywordTable KeywordTable::load(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path.string()));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error("InvalidConfig", path.string() + ": " + e.what());
    }
    return from_json(j);
}

nlohmann::json KeywordTable::to_json() const {
    nlohmann::json categories = nlohmann::json::array();
    for (const CategoryRule& rule : this->categories) {
        categories.push_back(
            {{"category", std::string(category_name(rule.category))}, {"patterns", rule.patterns}});
    }
    return {{"version", version},
            {"categories", categories},
            {"difficulty",
             {{"length_medium", length_medium},
              {"length_hard", length_hard},
              {"conditional_patterns", conditional_patterns},
              {"uncertainty_patterns", uncertainty_patterns}}},
            {"low_quality",
             {{"vague_patterns", vague_patterns}, {"min_question_words", min_question_words}}}};
}

const std::vector<std::regex>& KeywordTable::compiled(
    const std::vector<std::string>& patterns) const {
    for (const auto& [key, regexes] : cache_) {
        if (key == &patterns) return regexes;
    }
    std::vector<std::regex> regexes;
    regexes.reserve(patterns.size());
    for (const std::string& pattern : patterns) {
        try {
            regexes.emplace_back(pattern, std::regex::ECMAScript);
        } catch (const std::regex_error& e) {
            throw Error("InvalidConfig", "pattern does not compile: " + pattern + " (" + e.what() + ")");
        }
    }
    cache_.emplace_back(&patterns, std::move(regexes));
    return cache_.back().second;
}

CategoryAssignment assign_category(const std::string& question, const KeywordTable& table) {
    const std::string lowered = to_lower(question);
    for (const KeywordTable::CategoryRule& rule : table.categories) {
        for (const std::regex& pattern : table.compiled(rule.patterns)) {
            if (std::regex_search(lowered, pattern)) return {rule.category, false};
        }
    }
    return {Category::PracticalLabLogistics, true};
}

int difficulty_score(const std::string& question, const KeywordTable& table) {
    const std::string lowered = to_lower(question);
    const std::size_t words = word_tokens(question).size();

    int score = 0;
    if (words > static_cast<std::size_t>(table.length_medium)) ++score;
    if (words > static_cast<std::size_t>(table.length_hard)) ++score;
    for (const std::regex& pattern : table.compiled(table.conditional_patterns)) {
        if (std::regex_search(lowered, pattern)) ++score;
    }
    for (const std::regex& pattern : table.compiled(table.uncertainty_patterns)) {
        if (std::regex_search(lowered, pattern)) ++score;
    }
    return score;
}

Difficulty assign_difficulty(const std::string& question, const KeywordTable& table) {
    const int score = difficulty_score(question, table);
    if (score == 0) return Difficulty::Easy;
    if (score <= 2) return Difficulty::Medium;
    return Difficulty::Hard;
}

UnansweredResult drop_unanswered(std::span<const bridge::QaTriple> triples) {
    UnansweredResult result;
    for (const bridge::QaTriple& triple : triples) {
        const std::string answer = trim(triple.answer);
        bool drop = answer.empty() || is_bare_confirmation(answer);
        for (std::string_view phrase : kNoAnswerPhrases) {
            if (drop) break;
            drop = contains_ci(answer, phrase);
        }
        (drop ? result.dropped : result.kept).push_back(triple);
    }
    return result;
}

QualityResult drop_low_quality(std::span<const mcq::McqItem> items, const KeywordTable& table) {
    QualityResult result;
    const std::vector<std::regex>& vague = table.compiled(table.vague_patterns);
    for (const mcq::McqItem& item : items) {
        const std::string prompt = item.question_prompt();
        const std::string lowered = to_lower(prompt);

        std::string rule;
        for (std::size_t i = 0; i < vague.size() && rule.empty(); ++i) {
            if (std::regex_search(lowered, vague[i])) rule = "vague-plea";
        }
        if (rule.empty() && is_link_only(prompt)) rule = "link-only";
        if (rule.empty() &&
            word_tokens(prompt).size() < static_cast<std::size_t>(table.min_question_words)) {
            rule = "min-length";
        }

        if (rule.empty()) {
            result.kept.push_back(item);
        } else {
            result.dropped.push_back({item, rule});
        }
    }
    return result;
}

std::unordered_set<std::string> question_shingles(const std::string& question) {
    const std::vector<std::string> tokens = word_tokens(question);
    std::unordered_set<std::string> shingles;
    if (tokens.size() < 3) {
        std::string whole;
        for (const std::string& token : tokens) {
            if (!whole.empty()) whole.push_back(' ');
            whole += token;
        }
        if (!whole.empty()) shingles.insert(whole);
        return shingles;
    }
    for (std::size_t i = 0; i + 2 < tokens.size(); ++i) {
        shingles.insert(tokens[i] + ' ' + tokens[i + 1] + ' ' + tokens[i + 2]);
    }
    return shingles;
}

DedupResult near_dedup(std::span<const mcq::McqItem> items, double threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0)) {
        throw Error("InvalidConfig", "dedup threshold must be in (0,1]");
    }

    std::vector<std::unordered_set<std::string>> shingles;
    shingles.reserve(items.size());
    for (const mcq::McqItem& item : items) {
        shingles.push_back(question_shingles(item.question_prompt()));
    }

    IndexDsu dsu(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
        for (std::size_t j = i + 1; j < items.size(); ++j) {
            if (jaccard(shingles[i], shingles[j]) >= threshold) dsu.unite(i, j);
        }
    }

    // Winner per group: lexicographically-smallest id.
    std::vector<std::size_t> winner(items.size());
    std::iota(winner.begin(), winner.end(), 0);
    std::vector<std::vector<std::size_t>> members(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
        const std::size_t root = dsu.find(i);
        members[root].push_back(i);
        if (items[i].id < items[winner[root]].id) winner[root] = i;
    }

    DedupResult result;
    std::vector<bool> keep(items.size(), false);
    for (std::size_t i = 0; i < items.size(); ++i) keep[winner[dsu.find(i)]] = true;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (keep[i]) result.kept.push_back(items[i]);
    }
    for (std::size_t root = 0; root < items.size(); ++root) {
        if (members[root].size() < 2) continue;
        std::vector<std::string> ids;
        for (std::size_t index : members[root]) ids.push_back(items[index].id);
        std::sort(ids.begin(), ids.end());
        result.duplicate_groups.push_back(std::move(ids));
    }
    return result;
}

SplitResult split_dataset(std::span<const mcq::McqItem> items, double test_fraction,
                          std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw Error("InvalidConfig", "test_fraction must be in (0,1)");
    }

    // floor on the test side; the epsilon absorbs products like 0.3*10 that
    // land one ulp under the exact integer
    const std::size_t testCount = static_cast<std::size_t>(
        std::floor(test_fraction * static_cast<double>(items.size()) + 1e-9));
    const std::vector<std::size_t> order = shuffled_indices(items.size(), seed);

    std::vector<bool> isTest(items.size(), false);
    for (std::size_t i = 0; i < testCount; ++i) isTest[order[i]] = true;

    SplitResult result;
    for (std::size_t i = 0; i < items.size(); ++i) {
        mcq::McqItem item = items[i];
        item.split = isTest[i] ? Split::Test : Split::Train;
        (isTest[i] ? result.test : result.train).push_back(std::move(item));
    }
    return result;
}

}  // namespace genomebench::curation
