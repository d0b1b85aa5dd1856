#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "genomebench/common.hpp"
#include "genomebench/llm_bridge.hpp"
#include "genomebench/mcq.hpp"
#include "genomebench/reward.hpp"
#include "genomebench/taxonomy.hpp"
#include "json.hpp"

namespace genomebench::eval {

class InsufficientRuns : public Error {
public:
    InsufficientRuns(const std::string& question_id, int have, int need)
        : Error("InsufficientRuns", "question " + question_id + " has " + std::to_string(have) +
                                        " runs, need " + std::to_string(need)) {}
};

struct EvalRecord {
    std::string question_id;
    int run_index = 0;
    std::string raw_response;
    std::optional<char> extracted_label;
    bool correct = false;
    reward::RewardBreakdown reward;
    long latency_ms = 0;
};

nlohmann::json record_to_json(const EvalRecord& record);
EvalRecord record_from_json(const nlohmann::json& j);

struct PromptPair {
    std::string system;
    std::string user;
};

// System prompt demands <explanation> then <answer>, one of {a,b,c,d,e};
// user prompt is the item's question text verbatim.
PromptPair build_prompt(const mcq::McqItem& item);

struct RunOptions {
    int runs = 1;
    std::uint64_t seed = 0;
    std::filesystem::path journal;  // empty: no journal; else append-only JSONL, resumable
    int parallelism = 1;
};

// One record per (item, run). Invalid outputs count as incorrect. With a
// journal path, existing (question_id, run) pairs are skipped and new records
// are appended in deterministic (item, run) order.
std::vector<EvalRecord> run_eval(std::span<const mcq::McqItem> items,
                                 bridge::CompletionBackend& backend, const RunOptions& options);

// First-K convention: an item passes at K when any of runs 0..K-1 is correct.
std::vector<std::pair<int, double>> pass_at_k(std::span<const EvalRecord> records,
                                              std::span<const int> ks);

struct StratumStats {
    long records = 0;
    long correct = 0;
    double accuracy = 0.0;
};

struct EvalReport {
    double overall_accuracy = 0.0;
    double invalid_rate = 0.0;
    long record_count = 0;
    std::map<Category, StratumStats> per_category;
    std::map<Difficulty, StratumStats> per_difficulty;
    std::array<long, 5> gold_label_histogram{};  // over items' gold labels
    std::vector<std::pair<int, double>> pass_table;

    nlohmann::json to_json() const;
    std::string to_csv() const;
};

EvalReport make_report(std::span<const EvalRecord> records, std::span<const mcq::McqItem> items,
                       std::span<const int> ks = {});

void write_records(const std::filesystem::path& path, std::span<const EvalRecord> records);
std::vector<EvalRecord> read_records(const std::filesystem::path& path);

}  // namespace genomebench::eval
