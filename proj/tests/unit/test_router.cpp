#include "doctest.h"

#include <map>
#include <set>

#include <filesystem>
#include <random>

#include "genomebench/router.hpp"

namespace gb = genomebench;
using namespace gb::router;

namespace {

// Experts correct exactly on questions carrying their marker token.
struct SeparableWorld {
    ExpertResponses responses;
    std::vector<std::string> questions;
};

SeparableWorld separable_world(int experts, int questionsPerExpert, std::uint64_t seed) {
    SeparableWorld world;
    world.responses.expert_count = experts;
    std::mt19937_64 gen(seed);
    for (int e = 0; e < experts; ++e) {
        for (int q = 0; q < questionsPerExpert; ++q) {
            const std::string id = "q" + std::to_string(e) + "_" + std::to_string(q);
            world.responses.question_ids.push_back(id);
            world.questions.push_back("marker" + std::to_string(e) + " marker" + std::to_string(e) +
                                      " filler" + std::to_string(gen() % 1000) + " w" +
                                      std::to_string(gen() % 1000));
            std::vector<std::vector<ResponseRecord>> row;
            for (int m = 0; m < experts; ++m) {
                row.push_back({{"resp", m == e}});
            }
            world.responses.table.push_back(std::move(row));
        }
    }
    return world;
}

std::vector<std::vector<bool>> random_correctness(int experts, int questions, std::mt19937_64& gen) {
    std::vector<std::vector<bool>> table(experts, std::vector<bool>(questions));
    for (auto& row : table) {
        for (std::size_t q = 0; q < row.size(); ++q) row[q] = gen() % 2 == 0;
    }
    return table;
}

}  // namespace

TEST_CASE("complementarity hand case") {
    // expert 0: [1,0,1], expert 1: [0,0,1]
    const std::vector<std::vector<bool>> correctness{{true, false, true}, {false, false, true}};
    const auto matrix = complementarity(correctness);
    CHECK(matrix[0][0] == 1);  // only expert 0 solved q0
    CHECK(matrix[1][1] == 0);
    CHECK(matrix[0][1] == 1);  // 0 correct where 1 wrong: q0
    CHECK(matrix[1][0] == 0);
}

TEST_CASE("complementarity: all correct everywhere gives the zero matrix") {
    const std::vector<std::vector<bool>> correctness{{true, true}, {true, true}, {true, true}};
    for (const auto& row : complementarity(correctness)) {
        for (long value : row) CHECK(value == 0);
    }
}

TEST_CASE("complementarity: one dominant expert") {
    const int n = 7;
    std::vector<std::vector<bool>> correctness{std::vector<bool>(n, true),
                                               std::vector<bool>(n, false),
                                               std::vector<bool>(n, false)};
    const auto matrix = complementarity(correctness);
    CHECK(matrix[0][0] == n);
    CHECK(matrix[1][1] == 0);
    CHECK(matrix[0][1] == n);
    CHECK(matrix[0][2] == n);
    CHECK(matrix[1][0] == 0);
}

TEST_CASE("complementarity invariants on random tables") {
    std::mt19937_64 gen(13);
    for (int trial = 0; trial < 50; ++trial) {
        const int m = 2 + static_cast<int>(gen() % 4);
        const int n = 1 + static_cast<int>(gen() % 30);
        const auto correctness = random_correctness(m, n, gen);
        const auto matrix = complementarity(correctness);

        for (int i = 0; i < m; ++i) {
            long totalCorrect = 0;
            for (int q = 0; q < n; ++q) totalCorrect += correctness[i][q] ? 1 : 0;
            for (int j = 0; j < m; ++j) {
                if (i == j) continue;
                CHECK(matrix[i][i] <= matrix[i][j]);  // sole-solver subset
                long bothCorrect = 0;
                for (int q = 0; q < n; ++q) {
                    if (correctness[i][q] && correctness[j][q]) ++bothCorrect;
                }
                CHECK(matrix[i][j] + bothCorrect == totalCorrect);  // row consistency
            }
        }
    }
}

TEST_CASE("union_accuracy") {
    CHECK(union_accuracy({{true, false}, {false, true}}) == 1.0);
    CHECK(union_accuracy({{false, false}, {false, false}}) == 0.0);

    std::mt19937_64 gen(21);
    for (int trial = 0; trial < 30; ++trial) {
        const auto correctness = random_correctness(3, 40, gen);
        long solved = 0;  // brute-force OR-count
        for (int q = 0; q < 40; ++q) {
            if (correctness[0][q] || correctness[1][q] || correctness[2][q]) ++solved;
        }
        CHECK(union_accuracy(correctness) == doctest::Approx(solved / 40.0));
        // the union is a ceiling over every individual expert
        for (std::size_t expert = 0; expert < 3; ++expert) {
            CHECK(union_accuracy(correctness) >= expert_accuracy(correctness, expert));
        }
    }
}

TEST_CASE("featurize basics") {
    CHECK(featurize("", 16).empty());
    CHECK(featurize("same words here", 1 << 14) == featurize("same words here", 1 << 14));
    CHECK_THROWS_AS(featurize("x", 12), gb::Error);  // not a power of two

    // L2 norm 1 for non-empty text
    const auto features = featurize("one two three", 1 << 14);
    double norm = 0.0;
    for (const auto& [idx, value] : features) norm += value * value;
    CHECK(norm == doctest::Approx(1.0));
}

TEST_CASE("changing the final word moves at most 4 hashed coordinates") {
    const int dim = 1 << 14;
    const std::string a = "guide design for zebrafish";
    const std::string b = "guide design for mice";
    const auto fa = featurize(a, dim);
    const auto fb = featurize(b, dim);

    // independent hash trace of the n-grams that differ
    const auto bucket = [&](const std::string& s) {
        return static_cast<int>(gb::fnv1a64(s) & (dim - 1));
    };
    const std::set<int> expectedMoved{bucket("zebrafish"), bucket("mice"),
                                      bucket(std::string("for") + "\x1f" + "zebrafish"),
                                      bucket(std::string("for") + "\x1f" + "mice")};

    std::map<int, double> va(fa.begin(), fa.end());
    std::map<int, double> vb(fb.begin(), fb.end());
    std::set<int> moved;
    for (const auto& [idx, value] : va) {
        auto it = vb.find(idx);
        if (it == vb.end() || std::abs(it->second - value) > 1e-12) moved.insert(idx);
    }
    for (const auto& [idx, value] : vb) {
        if (va.find(idx) == va.end()) moved.insert(idx);
    }
    CHECK(moved.size() <= 4);
    for (int idx : moved) CHECK(expectedMoved.count(idx) == 1);
}

TEST_CASE("expert responses jsonl round trip") {
    SeparableWorld world = separable_world(3, 2, 0);
    const auto path = std::filesystem::temp_directory_path() / "gb_experts.jsonl";
    write_expert_responses(path, world.responses);
    const auto readBack = read_expert_responses(path);
    CHECK(readBack.expert_count == 3);
    CHECK(readBack.question_ids == world.responses.question_ids);
    CHECK(readBack.correctness() == world.responses.correctness());
    std::filesystem::remove(path);
}

TEST_CASE("router training beats the best single expert on a separable world") {
    SeparableWorld world = separable_world(4, 20, 3);
    gb::grpo::GrpoConfig config;
    config.group_size = 8;
    config.learning_rate = 0.5;
    config.epochs = 2;

    const auto result = train_router(world.responses, world.questions, config, 7);
    const auto report = route_and_report(result.policy, world.responses, world.questions);

    CHECK(report.best_single_accuracy == doctest::Approx(0.25));
    CHECK(report.union_accuracy == doctest::Approx(1.0));
    CHECK(report.routed_accuracy >= report.best_single_accuracy + 0.2);

    double shareSum = 0.0;
    for (double share : report.selection_shares) shareSum += share;
    CHECK(shareSum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("identical experts leave routed accuracy at the shared accuracy") {
    SeparableWorld world = separable_world(3, 10, 5);
    // overwrite: every expert correct exactly on even questions
    for (std::size_t q = 0; q < world.responses.question_count(); ++q) {
        for (int m = 0; m < 3; ++m) {
            world.responses.table[q][static_cast<std::size_t>(m)] = {{"resp", q % 2 == 0}};
        }
    }
    gb::grpo::GrpoConfig config;
    config.group_size = 4;
    config.learning_rate = 0.3;
    const auto result = train_router(world.responses, world.questions, config, 1);
    const auto report = route_and_report(result.policy, world.responses, world.questions);
    CHECK(report.routed_accuracy == doctest::Approx(0.5));
}

TEST_CASE("a dominant expert captures the probability mass") {
    // expert 2 always right, everyone else always wrong; majority over 3 seeds
    int passes = 0;
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        SeparableWorld world = separable_world(4, 15, seed);
        for (std::size_t q = 0; q < world.responses.question_count(); ++q) {
            for (int m = 0; m < 4; ++m) {
                world.responses.table[q][static_cast<std::size_t>(m)] = {{"resp", m == 2}};
            }
        }
        gb::grpo::GrpoConfig config;
        config.group_size = 8;
        config.learning_rate = 0.3;
        config.epochs = 4;
        const auto result = train_router(world.responses, world.questions, config, seed);

        double mass = 0.0;
        for (const std::string& question : world.questions) {
            mass += result.policy.action_dist(featurize(question, 1 << 14))[2];
        }
        if (mass / static_cast<double>(world.questions.size()) >= 0.9) ++passes;
    }
    CHECK(passes >= 2);
}

TEST_CASE("router reward draws one record per expert per iteration") {
    // one question, one expert, two records: correct and incorrect
    ExpertResponses responses;
    responses.expert_count = 2;
    responses.question_ids = {"q0"};
    responses.table = {{{{"right", true}, {"wrong", false}}, {{"only", true}}}};

    auto reward = make_router_reward(responses);
    std::mt19937_64 gen(3);

    bool sawBothValues = false;
    double previousFirst = 0.0;
    for (int iteration = 0; iteration < 64; ++iteration) {
        // all samples of one iteration must agree with its first draw
        const double first = reward(0, 0, 0, gen);
        CHECK((first == 1.0 || first == -1.0));
        for (int sample = 1; sample < 8; ++sample) {
            CHECK(reward(0, 0, sample, gen) == first);
        }
        if (iteration > 0 && first != previousFirst) sawBothValues = true;
        previousFirst = first;
        // the single-record expert always scores +1
        CHECK(reward(0, 1, 1, gen) == 1.0);
    }
    CHECK(sawBothValues);  // fresh uniform draw per iteration
}

TEST_CASE("route_and_report with a fixed policy") {
    SeparableWorld world = separable_world(3, 10, 9);
    // bias weights so expert 0 always wins the argmax
    gb::grpo::CategoricalPolicy policy(1 << 14, 3);
    for (int f = 0; f < policy.feature_dim(); ++f) policy.weights.at(f, 0) = 1.0;

    const auto report = route_and_report(policy, world.responses, world.questions);
    CHECK(report.routed_accuracy ==
          doctest::Approx(expert_accuracy(world.responses.correctness(), 0)));
    CHECK(report.selection_shares[0] == doctest::Approx(1.0));
}
