#include "genomebench/router.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>

namespace genomebench::router {

void ExpertResponses::validate() const {
    if (expert_count < 2) throw Error("InvalidResponses", "need at least 2 experts");
    if (table.size() != question_ids.size()) {
        throw Error("InvalidResponses", "table rows do not match question ids");
    }
    for (std::size_t q = 0; q < table.size(); ++q) {
        if (table[q].size() != static_cast<std::size_t>(expert_count)) {
            throw Error("InvalidResponses", "question " + question_ids[q] + " misses experts");
        }
        for (std::size_t m = 0; m < table[q].size(); ++m) {
            if (table[q][m].empty()) {
                throw Error("InvalidResponses", "no records for question " + question_ids[q] +
                                                    ", expert " + std::to_string(m));
            }
        }
    }
}

std::vector<std::vector<bool>> ExpertResponses::correctness() const {
    std::vector<std::vector<bool>> out(static_cast<std::size_t>(expert_count),
                                       std::vector<bool>(question_count(), false));
    for (std::size_t q = 0; q < question_count(); ++q) {
        for (int m = 0; m < expert_count; ++m) {
            out[static_cast<std::size_t>(m)][q] = table[q][static_cast<std::size_t>(m)][0].is_correct;
        }
    }
    return out;
}

ExpertResponses read_expert_responses(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("IoError", "cannot open " + path.string());

    struct Row {
        std::string question_id;
        int expert;
        int run;
        ResponseRecord record;
    };
    std::vector<Row> rows;
    std::string line;
    int maxExpert = -1;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const nlohmann::json j = nlohmann::json::parse(line);
        Row row;
        row.question_id = j.at("question_id").get<std::string>();
        row.expert = j.at("expert").get<int>();
        row.run = j.value("run", 0);
        row.record.response_text = j.value("response", std::string());
        row.record.is_correct = j.at("is_correct").get<bool>();
        maxExpert = std::max(maxExpert, row.expert);
        rows.push_back(std::move(row));
    }

    ExpertResponses responses;
    responses.expert_count = maxExpert + 1;
    std::map<std::string, std::size_t> questionIndex;  // ordered by first appearance
    for (const Row& row : rows) {
        if (questionIndex.find(row.question_id) == questionIndex.end()) {
            questionIndex.emplace(row.question_id, responses.question_ids.size());
            responses.question_ids.push_back(row.question_id);
            responses.table.emplace_back(static_cast<std::size_t>(responses.expert_count));
        }
    }
    for (auto& perQuestion : responses.table) {
        perQuestion.resize(static_cast<std::size_t>(responses.expert_count));
    }

    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.run < b.run; });
    for (const Row& row : rows) {
        const std::size_t q = questionIndex.at(row.question_id);
        responses.table[q][static_cast<std::size_t>(row.expert)].push_back(row.record);
    }
    responses.validate();
    return responses;
}

void write_expert_responses(const std::filesystem::path& path, const ExpertResponses& responses) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("IoError", "cannot write " + path.string());
    for (std::size_t q = 0; q < responses.question_count(); ++q) {
        for (int m = 0; m < responses.expert_count; ++m) {
            const auto& records = responses.table[q][static_cast<std::size_t>(m)];
            for (std::size_t run = 0; run < records.size(); ++run) {
                out << nlohmann::json{{"question_id", responses.question_ids[q]},
                                      {"expert", m},
                                      {"run", run},
                                      {"response", records[run].response_text},
                                      {"is_correct", records[run].is_correct}}
                           .dump()
                    << '\n';
            }
        }
    }
}

ComplementarityMatrix complementarity(const std::vector<std::vector<bool>>& correctness) {
    const std::size_t m = correctness.size();
    if (m == 0) throw Error("InvalidResponses", "no experts");
    const std::size_t n = correctness[0].size();

    ComplementarityMatrix matrix(m, std::vector<long>(m, 0));
    for (std::size_t q = 0; q < n; ++q) {
        std::size_t correctCount = 0;
        std::size_t lastCorrect = 0;
        for (std::size_t i = 0; i < m; ++i) {
            if (correctness[i][q]) {
                ++correctCount;
                lastCorrect = i;
            }
        }
        if (correctCount == 1) matrix[lastCorrect][lastCorrect] += 1;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                if (i != j && correctness[i][q] && !correctness[j][q]) matrix[i][j] += 1;
            }
        }
    }
    return matrix;
}

double union_accuracy(const std::vector<std::vector<bool>>& correctness) {
    const std::size_t m = correctness.size();
    if (m == 0) throw Error("InvalidResponses", "no experts");
    const std::size_t n = correctness[0].size();
    if (n == 0) return 0.0;

    std::size_t solved = 0;
    for (std::size_t q = 0; q < n; ++q) {
        for (std::size_t i = 0; i < m; ++i) {
            if (correctness[i][q]) {
                ++solved;
                break;
            }
        }
    }
    return static_cast<double>(solved) / static_cast<double>(n);
}

double expert_accuracy(const std::vector<std::vector<bool>>& correctness, std::size_t expert) {
    const std::size_t n = correctness.at(expert).size();
    if (n == 0) return 0.0;
    std::size_t correct = 0;
    for (bool c : correctness[expert]) correct += c ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(n);
}

grpo::FeatureVec featurize(const std::string& question, int dim) {
    if (dim <= 0 || (dim & (dim - 1)) != 0) {
        throw Error("InvalidConfig", "feature dim must be a power of two");
    }
    const std::vector<std::string> tokens = word_tokens(question);
    std::map<int, double> buckets;  // ordered: FeatureVec wants increasing indices
    const std::uint64_t mask = static_cast<std::uint64_t>(dim - 1);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        buckets[static_cast<int>(fnv1a64(tokens[i]) & mask)] += 1.0;
        if (i + 1 < tokens.size()) {
            buckets[static_cast<int>(fnv1a64(tokens[i] + "\x1f" + tokens[i + 1]) & mask)] += 1.0;
        }
    }

    double norm = 0.0;
    for (const auto& [index, value] : buckets) norm += value * value;
    norm = std::sqrt(norm);

    grpo::FeatureVec features;
    features.reserve(buckets.size());
    for (const auto& [index, value] : buckets) {
        features.emplace_back(index, norm > 0.0 ? value / norm : 0.0);
    }
    return features;
}

grpo::RewardFn make_router_reward(const ExpertResponses& responses) {
    // Per-iteration record cache: sample_index 0 starts a fresh iteration.
    struct DrawCache {
        std::size_t item = 0;
        std::vector<int> record_by_expert;
    };
    auto cache = std::make_shared<DrawCache>();
    cache->record_by_expert.assign(static_cast<std::size_t>(responses.expert_count), -1);

    return [&responses, cache](std::size_t item, int action, int sample_index,
                               std::mt19937_64& gen) {
        if (sample_index == 0 || cache->item != item) {
            cache->item = item;
            std::fill(cache->record_by_expert.begin(), cache->record_by_expert.end(), -1);
        }
        int& pick = cache->record_by_expert[static_cast<std::size_t>(action)];
        const auto& records = responses.table[item][static_cast<std::size_t>(action)];
        if (pick < 0) {
            pick = records.size() == 1 ? 0 : static_cast<int>(gen() % records.size());
        }
        return records[static_cast<std::size_t>(pick)].is_correct ? 1.0 : -1.0;
    };
}

RouterTrainResult train_router(const ExpertResponses& responses,
                               std::span<const std::string> questions,
                               grpo::GrpoConfig config, std::uint64_t seed, int feature_dim) {
    responses.validate();
    if (questions.size() != responses.question_count()) {
        throw Error("InvalidResponses", "question texts do not match response table");
    }

    std::vector<grpo::TrainItem> items;
    items.reserve(questions.size());
    for (const std::string& question : questions) {
        items.push_back({featurize(question, feature_dim), 0});
    }

    RouterTrainResult result;
    result.policy = grpo::CategoricalPolicy(feature_dim, responses.expert_count);

    grpo::TrainOptions options;
    options.seed = seed;
    options.reward = make_router_reward(responses);
    options.correct = [&responses](std::size_t item, int action) {
        return responses.table[item][static_cast<std::size_t>(action)][0].is_correct;
    };

    result.log = grpo::train_grpo(result.policy, items, config, std::move(options));
    return result;
}

nlohmann::json RoutedEvalReport::to_json() const {
    return {{"routed_accuracy", routed_accuracy},
            {"selection_shares", selection_shares},
            {"selections", selections},
            {"best_expert", best_expert},
            {"best_single_accuracy", best_single_accuracy},
            {"union_accuracy", union_accuracy},
            {"routed_differently", routed_differently},
            {"routed_differently_accuracy", routed_differently_accuracy},
            {"non_routed_accuracy", non_routed_accuracy}};
}

RoutedEvalReport route_and_report(const grpo::CategoricalPolicy& policy,
                                  const ExpertResponses& responses,
                                  std::span<const std::string> questions, int feature_dim) {
    responses.validate();
    if (questions.size() != responses.question_count()) {
        throw Error("InvalidResponses", "question texts do not match response table");
    }
    const std::vector<std::vector<bool>> correctness = responses.correctness();
    const std::size_t m = static_cast<std::size_t>(responses.expert_count);
    const std::size_t n = questions.size();

    RoutedEvalReport report;
    report.union_accuracy = union_accuracy(correctness);
    for (std::size_t expert = 0; expert < m; ++expert) {
        const double accuracy = expert_accuracy(correctness, expert);
        if (accuracy > report.best_single_accuracy) {
            report.best_single_accuracy = accuracy;
            report.best_expert = static_cast<int>(expert);
        }
    }

    std::vector<long> counts(m, 0);
    long correctTotal = 0;
    long routedCorrect = 0;
    long nonRoutedCorrect = 0;
    long nonRouted = 0;
    for (std::size_t q = 0; q < n; ++q) {
        const int choice = policy.greedy_action(featurize(questions[q], feature_dim));
        report.selections.push_back(choice);
        counts[static_cast<std::size_t>(choice)] += 1;
        const bool correct = correctness[static_cast<std::size_t>(choice)][q];
        correctTotal += correct ? 1 : 0;
        if (choice == report.best_expert) {
            ++nonRouted;
            nonRoutedCorrect += correct ? 1 : 0;
        } else {
            report.routed_differently += 1;
            routedCorrect += correct ? 1 : 0;
        }
    }

    report.routed_accuracy = n == 0 ? 0.0 : static_cast<double>(correctTotal) / static_cast<double>(n);
    report.selection_shares.resize(m, 0.0);
    for (std::size_t expert = 0; expert < m; ++expert) {
        report.selection_shares[expert] =
            n == 0 ? 0.0 : static_cast<double>(counts[expert]) / static_cast<double>(n);
    }
    report.routed_differently_accuracy =
        report.routed_differently == 0
            ? 0.0
            : static_cast<double>(routedCorrect) / static_cast<double>(report.routed_differently);
    report.non_routed_accuracy =
        nonRouted == 0 ? 0.0 : static_cast<double>(nonRoutedCorrect) / static_cast<double>(nonRouted);
    return report;
}

}  // namespace genomebench::router
