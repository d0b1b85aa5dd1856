#pragma once

#include <optional>
#include <string_view>

#include "genomebench/common.hpp"

namespace genomebench::reward {

// Rule-based score for one model response: +1 for strict
// <explanation>...</explanation> <answer>x</answer> structure, +2 for the
// correct letter, so total is in {0,1,2,3}.
struct RewardBreakdown {
    int format_reward = 0;       // {0,1}
    int correctness_reward = 0;  // {0,2}
    int total = 0;
    std::optional<char> extracted_label;  // 'a'..'e'
    bool invalid = false;                 // no extractable answer
};

class InvalidGold : public Error {
public:
    explicit InvalidGold(char gold)
        : Error("InvalidGold", std::string("gold label must be a-e, got '") + gold + "'") {}
};

// Letter inside the last <answer>...</answer> pair, whitespace trimmed and
// lowercased. Anything that is not a single a-e letter yields nullopt.
std::optional<char> extract_answer(std::string_view response);

// True when the whole response is <explanation>...</explanation> followed by
// <answer>letter</answer> with only whitespace around and between the tags.
bool format_compliant(std::string_view response);

RewardBreakdown score_response(std::string_view response, char gold);

}  // namespace genomebench::reward
