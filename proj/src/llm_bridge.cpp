#include "genomebench/llm_bridge.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <thread>

#include "genomebench/prompts.hpp"
#include "httplib.h"

namespace genomebench::bridge {

namespace {

std::string normalize_ws(std::string_view text) {
    std::string out;
    bool lastSpace = true;
    for (char c : text) {
        const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
        if (space && lastSpace) continue;
        out.push_back(space ? ' ' : c);
        lastSpace = space;
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

const std::regex kAliasToken("\\bPerson[A-Z]+\\b");

}  // namespace

void CompletionRequest::validate() const {
    if (!std::isfinite(temperature) || temperature < 0.0) {
        throw Error("InvalidRequest", "temperature must be finite and >= 0");
    }
    if (max_tokens <= 0) throw Error("InvalidRequest", "max_tokens must be positive");
}

// ---- remote backend ----

RemoteBackend::RemoteBackend(RemoteConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) throw Error("InvalidConfig", "remote backend needs a base URL");
}

nlohmann::json RemoteBackend::build_request_body(const RemoteConfig& config,
                                                 const CompletionRequest& request) {
    return nlohmann::json{
        {"model", config.model},
        {"messages",
         {{{"role", "system"}, {"content", request.system_prompt}},
          {{"role", "user"}, {"content", request.user_prompt}}}},
        {"temperature", request.temperature},
        {"max_tokens", request.max_tokens},
    };
}

std::string RemoteBackend::parse_response_body(const std::string& body) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error&) {
        throw MalformedResponse(body);
    }
    if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
        throw MalformedResponse(body);
    }
    const nlohmann::json& first = j["choices"][0];
    if (first.contains("message") && first["message"].contains("content") &&
        first["message"]["content"].is_string()) {
        return first["message"]["content"].get<std::string>();
    }
    if (first.contains("text") && first["text"].is_string()) {
        return first["text"].get<std::string>();
    }
    throw MalformedResponse(body);
}

std::string RemoteBackend::complete(const CompletionRequest& request, CallTelemetry* telemetry) {
    request.validate();
    const auto start = std::chrono::steady_clock::now();

    httplib::Client client(config_.base_url);
    client.set_connection_timeout(config_.timeout_seconds);
    client.set_read_timeout(config_.timeout_seconds);

    httplib::Headers headers{{"Content-Type", "application/json"}};
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key != nullptr && *key != '\0') {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    const std::string body = build_request_body(config_, request).dump();

    int attempts = 0;
    std::string lastPayload;
    bool lastWasRateLimit = false;
    for (int retry = 0; retry <= config_.retry.max_retries; ++retry) {
        if (retry > 0) {
            std::this_thread::sleep_for(config_.retry.base_delay * (1L << (retry - 1)));
        }
        ++attempts;
        httplib::Result result = client.Post(config_.path, headers, body, "application/json");

        if (!result) {
            lastPayload = httplib::to_string(result.error());
            lastWasRateLimit = false;
            continue;  // transport failure, retryable
        }
        if (result->status == 401 || result->status == 403) {
            throw AuthError(result->body);
        }
        if (result->status == 429 || result->status >= 500) {
            lastPayload = result->body;
            lastWasRateLimit = result->status == 429;
            continue;
        }
        if (result->status != 200) {
            throw MalformedResponse("HTTP " + std::to_string(result->status) + ": " + result->body);
        }
        if (telemetry != nullptr) {
            telemetry->attempts = attempts;
            telemetry->retries = attempts - 1;
            telemetry->latency_ms = static_cast<long>(
                std::chrono::duration_cast<std::chrono::milliseconds>(
                    std::chrono::steady_clock::now() - start)
                    .count());
        }
        return parse_response_body(result->body);
    }

    if (lastWasRateLimit) throw RateLimited(lastPayload);
    throw Timeout("exhausted retries: " + lastPayload);
}

// ---- mock backend ----

MockBackend::MockBackend(std::vector<MockRule> rules, bool echo_user, std::string default_response)
    : rules_(std::move(rules)), echo_user_(echo_user),
      default_response_(std::move(default_response)) {}

MockBackend MockBackend::from_json(const nlohmann::json& j) {
    std::vector<MockRule> rules;
    if (j.contains("rules")) {
        for (const nlohmann::json& rule : j["rules"]) {
            MockRule parsed;
            parsed.match = rule.value("match", std::string());
            if (rule.contains("responses")) {
                parsed.responses = rule["responses"].get<std::vector<std::string>>();
            } else if (rule.contains("response")) {
                parsed.responses.push_back(rule["response"].get<std::string>());
            }
            if (parsed.responses.empty()) {
                throw Error("InvalidConfig", "mock rule without responses");
            }
            rules.push_back(std::move(parsed));
        }
    }
    return MockBackend(std::move(rules), j.value("echo", false),
                       j.value("default", std::string()));
}

MockBackend MockBackend::load(const std::filesystem::path& path) {
    return from_json(nlohmann::json::parse(read_text_file(path.string())));
}

MockBackend MockBackend::echo() { return MockBackend({}, /*echo_user=*/true); }

std::string MockBackend::complete(const CompletionRequest& request, CallTelemetry* telemetry) {
    request.validate();
    if (telemetry != nullptr) *telemetry = CallTelemetry{1, 0, 0};

    for (const MockRule& rule : rules_) {
        if (!rule.match.empty() && request.user_prompt.find(rule.match) == std::string::npos) {
            continue;
        }
        const std::uint64_t mix =
            fnv1a64(request.user_prompt,
                    fnv1a64(request.system_prompt, request.seed.value_or(0) ^ 0x9e3779b97f4a7c15ULL));
        return rule.responses[mix % rule.responses.size()];
    }
    if (echo_user_) return request.user_prompt;
    if (!default_response_.empty()) return default_response_;
    throw Error("MockNoRule", "no mock rule matches: " + request.user_prompt.substr(0, 80));
}

// ---- triples ----

nlohmann::json triple_to_json(const QaTriple& triple) {
    return {{"question", triple.question}, {"answer", triple.answer}, {"context", triple.context}};
}

QaTriple triple_from_json(const nlohmann::json& j) {
    QaTriple triple;
    triple.question = j.at("question").get<std::string>();
    triple.answer = j.at("answer").get<std::string>();
    triple.context = j.value("context", std::string());
    return triple;
}

void write_triples(const std::filesystem::path& path, const std::vector<QaTriple>& triples) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("IoError", "cannot write " + path.string());
    for (const QaTriple& triple : triples) out << triple_to_json(triple).dump() << '\n';
}

std::vector<QaTriple> read_triples(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("IoError", "cannot open " + path.string());
    std::vector<QaTriple> triples;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        triples.push_back(triple_from_json(nlohmann::json::parse(line)));
    }
    return triples;
}

// ---- pipeline steps ----

ExtractionResult extract_triples(const ingest::EmailThread& thread, CompletionBackend& backend) {
    CompletionRequest request;
    request.system_prompt = std::string(prompts::kExtractSystem);
    request.user_prompt = ingest::render_thread(thread);
    request.temperature = 0.0;
    request.max_tokens = 4096;

    const std::string raw = backend.complete(request);
    nlohmann::json parsed;
    try {
        parsed = nlohmann::json::parse(trim(raw));
    } catch (const nlohmann::json::parse_error&) {
        throw UnparseableModelOutput(raw);
    }
    if (!parsed.is_array()) throw UnparseableModelOutput(raw);

    ExtractionResult result;
    for (const nlohmann::json& record : parsed) {
        if (!record.is_object() || !record.contains("question") || !record.contains("answer") ||
            !record["question"].is_string() || !record["answer"].is_string()) {
            ++result.records_dropped;
            continue;
        }
        QaTriple triple;
        triple.question = trim(record["question"].get<std::string>());
        triple.answer = trim(record["answer"].get<std::string>());
        if (record.contains("context") && record["context"].is_string()) {
            triple.context = trim(record["context"].get<std::string>());
        }
        if (triple.question.empty() || triple.answer.empty()) {
            ++result.records_dropped;
            continue;
        }
        result.triples.push_back(std::move(triple));
    }
    return result;
}

bool contains_alias_token(std::string_view text) {
    return std::regex_search(text.begin(), text.end(), kAliasToken);
}

std::string rewrite_question(const QaTriple& triple, CompletionBackend& backend) {
    if (trim(triple.question).empty()) throw Error("InvalidTriple", "empty question");

    CompletionRequest request;
    request.system_prompt = std::string(prompts::kRewriteSystem);
    request.user_prompt = triple.context.empty()
                              ? triple.question
                              : "Question context: " + triple.context + " Question: " + triple.question;
    request.temperature = 0.0;

    std::string output = trim(backend.complete(request));
    if (!contains_alias_token(output)) return output;

    // One corrective re-prompt before surfacing the leak.
    CompletionRequest retry = request;
    retry.system_prompt += "\nYour previous answer still referenced anonymized participants "
                           "(PersonA, PersonB, ...). Remove every such reference.";
    output = trim(backend.complete(retry));
    if (contains_alias_token(output)) throw AliasLeak(output);
    return output;
}

mcq::OptionSet generate_options(const std::string& question, const std::string& gold_answer,
                                CompletionBackend& backend, double gold_threshold) {
    if (trim(question).empty() || trim(gold_answer).empty()) {
        throw Error("InvalidInput", "question and gold answer must be non-empty");
    }

    CompletionRequest request;
    request.system_prompt = std::string(prompts::kOptionsSystem);
    request.user_prompt = "Question: " + question + "\nCorrect answer: " + gold_answer;
    request.temperature = 0.0;

    const std::string raw = backend.complete(request);
    nlohmann::json parsed;
    try {
        parsed = nlohmann::json::parse(trim(raw));
    } catch (const nlohmann::json::parse_error&) {
        throw UnparseableModelOutput(raw);
    }
    if (!parsed.is_array()) throw UnparseableModelOutput(raw);

    // Distinct after whitespace normalization; extra candidates are ignored.
    std::vector<std::string> options;
    std::vector<std::string> normalized;
    for (const nlohmann::json& candidate : parsed) {
        if (!candidate.is_string()) continue;
        const std::string text = trim(candidate.get<std::string>());
        if (text.empty()) continue;
        const std::string norm = normalize_ws(text);
        if (std::find(normalized.begin(), normalized.end(), norm) != normalized.end()) continue;
        options.push_back(text);
        normalized.push_back(norm);
        if (options.size() == 5) break;
    }
    if (options.size() < 5) throw TooFewOptions(options.size());

    int bestIndex = 0;
    double bestScore = -1.0;
    for (std::size_t i = 0; i < options.size(); ++i) {
        const double score = token_jaccard(options[i], gold_answer);
        if (score > bestScore) {
            bestScore = score;
            bestIndex = static_cast<int>(i);
        }
    }
    if (bestScore <= gold_threshold) throw GoldNotFound(bestScore);

    mcq::OptionSet result;
    std::copy(options.begin(), options.end(), result.options.begin());
    result.correct_index = bestIndex;
    return result;
}

}  // namespace genomebench::bridge
