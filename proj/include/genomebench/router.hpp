#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "genomebench/common.hpp"
#include "genomebench/grpo.hpp"
#include "json.hpp"

namespace genomebench::router {

struct ResponseRecord {
    std::string response_text;
    bool is_correct = false;
};

// Pre-generated completions: per question, per expert, at least one record.
struct ExpertResponses {
    int expert_count = 0;
    std::vector<std::string> question_ids;
    // table[question][expert] -> records
    std::vector<std::vector<std::vector<ResponseRecord>>> table;

    std::size_t question_count() const { return question_ids.size(); }
    void validate() const;

    // First-record correctness per (expert, question); the deterministic view
    // used by complementarity and evaluation.
    std::vector<std::vector<bool>> correctness() const;
};

// JSONL rows: {"question_id","expert","run","response","is_correct"}
ExpertResponses read_expert_responses(const std::filesystem::path& path);
void write_expert_responses(const std::filesystem::path& path, const ExpertResponses& responses);

// M x M matrix: diagonal (i,i) counts questions ONLY expert i answered
// correctly; off-diagonal (i,j) counts questions where i was correct and j
// was not.
using ComplementarityMatrix = std::vector<std::vector<long>>;
ComplementarityMatrix complementarity(const std::vector<std::vector<bool>>& correctness);

// Fraction of questions answered correctly by at least one expert; the
// ceiling for any router.
double union_accuracy(const std::vector<std::vector<bool>>& correctness);

double expert_accuracy(const std::vector<std::vector<bool>>& correctness, std::size_t expert);

// Hashed bag of lowercased word unigrams+bigrams, L2-normalized. dim must be
// a power of two.
grpo::FeatureVec featurize(const std::string& question, int dim = 1 << 14);

struct RouterTrainResult {
    grpo::CategoricalPolicy policy;
    grpo::TrainingLog log;
};

// +1/-1 reward over pre-generated records. One record is drawn uniformly per
// (question, expert) per training iteration: repeated selections of the same
// expert within one group score against the same draw.
grpo::RewardFn make_router_reward(const ExpertResponses& responses);

// GRPO over expert indices: +1 when a uniformly drawn pre-generated record of
// the selected expert is correct, -1 otherwise.
RouterTrainResult train_router(const ExpertResponses& responses,
                               std::span<const std::string> questions,
                               grpo::GrpoConfig config, std::uint64_t seed = 0,
                               int feature_dim = 1 << 14);

struct RoutedEvalReport {
    double routed_accuracy = 0.0;
    std::vector<double> selection_shares;  // per expert, sums to 1
    std::vector<int> selections;           // chosen expert per question
    int best_expert = 0;
    double best_single_accuracy = 0.0;
    double union_accuracy = 0.0;
    long routed_differently = 0;           // questions routed away from the best expert
    double routed_differently_accuracy = 0.0;
    double non_routed_accuracy = 0.0;

    nlohmann::json to_json() const;
};

// Greedy (argmax) routing per question, ties to the lowest expert index.
RoutedEvalReport route_and_report(const grpo::CategoricalPolicy& policy,
                                  const ExpertResponses& responses,
                                  std::span<const std::string> questions,
                                  int feature_dim = 1 << 14);

}  // namespace genomebench::router
