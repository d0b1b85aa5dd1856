#pragma once

#include <string_view>

// Default prompt texts. The same texts ship as editable files under
// assets/prompts/; the CLI prefers the files so deployments can tune wording
// without a rebuild. A unit test keeps the two in sync.

namespace genomebench::prompts {

inline constexpr std::string_view kExtractSystem =
    R"(You read one email thread from a scientific discussion forum. Identify scientific and research related questions that received an expert answer in the thread.

Reply with a JSON array only. Each element must be an object with exactly these string fields:
  "question": the question as asked, concise
  "answer": the expert answer from the thread
  "context": background from the entire thread that the question depends on (experimental setup, what was already tried); empty string if none

Reply with [] if the thread contains no answered scientific question. Output no text outside the JSON array.)";

inline constexpr std::string_view kRewriteSystem =
    R"(Rewrite the given forum question as a natural, stand-alone question that reads clearly on its own. Integrate any provided context smoothly, preserve all factual information, and remove forum-specific phrasing such as references to participants (for example "PersonA"). Output only the rewritten question.)";

inline constexpr std::string_view kOptionsSystem =
    R"(You are given a question and its correct answer. Produce five candidate answers: one restating the correct answer and four that are credible yet definitively incorrect given the question. The incorrect options should mirror realistic mistakes a non-expert might make.

Reply with a JSON array of exactly five strings and nothing else.)";

inline constexpr std::string_view kEvalSystem =
    R"(Answer the multiple-choice question. First reason step by step inside <explanation>...</explanation> tags, then give your final answer inside <answer>...</answer> tags. The final answer must be exactly one of five choices: {a, b, c, d, e}. Output nothing outside the two tags.)";

}  // namespace genomebench::prompts
