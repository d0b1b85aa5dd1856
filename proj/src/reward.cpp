#include "genomebench/reward.hpp"

#include <cctype>
#include <regex>
#include <string>

namespace genomebench::reward {

namespace {

const std::regex kAnswerTag("<answer>([\\s\\S]*?)</answer>");

// Full-match pattern for the format reward: explanation block, then answer
// block holding exactly one letter, nothing but whitespace elsewhere.
const std::regex kStrictFormat(
    "\\s*<explanation>[\\s\\S]*?</explanation>\\s*<answer>\\s*[a-eA-E]\\s*</answer>\\s*");

}  // namespace

std::optional<char> extract_answer(std::string_view response) {
    std::match_results<std::string_view::const_iterator> match;
    auto begin = response.begin();
    std::optional<std::string> last;
    while (std::regex_search(begin, response.end(), match, kAnswerTag)) {
        last = match[1].str();
        begin = match.suffix().first;
    }
    if (!last) return std::nullopt;
    const std::string inner = trim(*last);
    if (inner.size() != 1) return std::nullopt;
    const char letter = static_cast<char>(std::tolower(static_cast<unsigned char>(inner[0])));
    if (letter < 'a' || letter > 'e') return std::nullopt;
    return letter;
}

bool format_compliant(std::string_view response) {
    return std::regex_match(response.begin(), response.end(), kStrictFormat);
}

RewardBreakdown score_response(std::string_view response, char gold) {
    const char g = static_cast<char>(std::tolower(static_cast<unsigned char>(gold)));
    if (g < 'a' || g > 'e') throw InvalidGold(gold);

    RewardBreakdown out;
    out.extracted_label = extract_answer(response);
    out.invalid = !out.extracted_label.has_value();
    out.format_reward = format_compliant(response) ? 1 : 0;
    out.correctness_reward = (out.extracted_label && *out.extracted_label == g) ? 2 : 0;
    out.total = out.format_reward + out.correctness_reward;
    return out;
}

}  // namespace genomebench::reward
