#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "genomebench/common.hpp"
#include "genomebench/ingest.hpp"
#include "genomebench/mcq.hpp"
#include "json.hpp"

namespace genomebench::bridge {

struct CompletionRequest {
    std::string system_prompt;
    std::string user_prompt;
    double temperature = 0.0;  // pipeline calls default to 0 for reproducibility
    int max_tokens = 1024;
    std::optional<std::uint64_t> seed;  // mock backend only

    void validate() const;
};

struct CallTelemetry {
    int attempts = 0;
    int retries = 0;
    long latency_ms = 0;
};

class AuthError : public Error {
public:
    explicit AuthError(const std::string& payload) : Error("AuthError", payload) {}
};
class RateLimited : public Error {
public:
    explicit RateLimited(const std::string& payload) : Error("RateLimited", payload) {}
};
class Timeout : public Error {
public:
    explicit Timeout(const std::string& detail) : Error("Timeout", detail) {}
};
class MalformedResponse : public Error {
public:
    explicit MalformedResponse(const std::string& payload)
        : Error("MalformedResponse", payload), payload_(payload) {}
    const std::string& payload() const { return payload_; }

private:
    std::string payload_;
};
class UnparseableModelOutput : public Error {
public:
    explicit UnparseableModelOutput(const std::string& raw)
        : Error("UnparseableModelOutput", raw), raw_(raw) {}
    const std::string& raw() const { return raw_; }

private:
    std::string raw_;
};
class AliasLeak : public Error {
public:
    explicit AliasLeak(const std::string& output)
        : Error("AliasLeak", "rewritten question still contains alias tokens: " + output) {}
};
class GoldNotFound : public Error {
public:
    explicit GoldNotFound(double best)
        : Error("GoldNotFound",
                "no option matches the gold answer above threshold (best overlap " +
                    std::to_string(best) + ")") {}
};
class TooFewOptions : public Error {
public:
    explicit TooFewOptions(std::size_t n)
        : Error("TooFewOptions", "need 5 distinct options, got " + std::to_string(n)) {}
};

class CompletionBackend {
public:
    virtual ~CompletionBackend() = default;
    virtual std::string complete(const CompletionRequest& request,
                                 CallTelemetry* telemetry = nullptr) = 0;
};

struct RetryPolicy {
    int max_retries = 3;                           // attempts = 1 + max_retries
    std::chrono::milliseconds base_delay{1000};    // 1s, doubled per retry: 1s/2s/4s
};

struct RemoteConfig {
    std::string base_url;  // scheme://host[:port]
    std::string model;
    std::string path = "/v1/chat/completions";
    std::string api_key_env = "LLM_API_KEY";
    RetryPolicy retry;
    int timeout_seconds = 60;
};

// OpenAI-compatible chat-completions client over cpp-httplib. Transient
// failures (429/5xx/transport) are retried with exponential backoff up to the
// configured cap; auth failures and malformed bodies surface immediately with
// the raw payload attached.
class RemoteBackend : public CompletionBackend {
public:
    explicit RemoteBackend(RemoteConfig config);
    std::string complete(const CompletionRequest& request,
                         CallTelemetry* telemetry = nullptr) override;

    static nlohmann::json build_request_body(const RemoteConfig& config,
                                             const CompletionRequest& request);
    static std::string parse_response_body(const std::string& body);

private:
    RemoteConfig config_;
};

// Deterministic offline backend: ordered substring rules, each holding one or
// more candidate responses; the pick is a pure function of (prompts, seed).
struct MockRule {
    std::string match;  // substring of the user prompt; empty matches everything
    std::vector<std::string> responses;
};

class MockBackend : public CompletionBackend {
public:
    MockBackend() = default;
    MockBackend(std::initializer_list<MockRule> rules)
        : rules_(rules.begin(), rules.end()) {}
    explicit MockBackend(std::vector<MockRule> rules, bool echo_user = false,
                         std::string default_response = {});

    static MockBackend from_json(const nlohmann::json& j);
    static MockBackend load(const std::filesystem::path& path);

    // Convenience: a backend that returns the user prompt verbatim.
    static MockBackend echo();

    std::string complete(const CompletionRequest& request,
                         CallTelemetry* telemetry = nullptr) override;

private:
    std::vector<MockRule> rules_;
    bool echo_user_ = false;
    std::string default_response_;
};

// ---- prompt-driven pipeline steps ----

struct QaTriple {
    std::string question;
    std::string answer;
    std::string context;
};

nlohmann::json triple_to_json(const QaTriple& triple);
QaTriple triple_from_json(const nlohmann::json& j);
void write_triples(const std::filesystem::path& path, const std::vector<QaTriple>& triples);
std::vector<QaTriple> read_triples(const std::filesystem::path& path);

struct ExtractionResult {
    std::vector<QaTriple> triples;
    int records_dropped = 0;  // schema-invalid records in the model reply
};

// Prompts the backend with the rendered thread and parses a strict JSON array
// of {question, answer, context} records. "[]" is a valid empty result; prose
// without JSON raises UnparseableModelOutput with the raw reply attached.
ExtractionResult extract_triples(const ingest::EmailThread& thread, CompletionBackend& backend);

// Rewrites the triple into one self-contained question. Context, when
// present, is sent as "Question context: <context> Question: <question>".
// Outputs containing PersonX alias tokens are re-prompted once, then AliasLeak.
std::string rewrite_question(const QaTriple& triple, CompletionBackend& backend);

bool contains_alias_token(std::string_view text);

// Requests the true answer plus four distractors, then locates the gold
// option by token-overlap (Jaccard on lowercased word sets) above the
// threshold.
mcq::OptionSet generate_options(const std::string& question, const std::string& gold_answer,
                                CompletionBackend& backend, double gold_threshold = 0.5);

}  // namespace genomebench::bridge
