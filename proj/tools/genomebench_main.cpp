// Single entry point wiring the pipeline and experiment stages into
// subcommands. Every run writes a manifest (config snapshot, seed, input
// hashes, tool version) so deterministic stages can be reproduced bit-exactly.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "genomebench/curation.hpp"
#include "genomebench/eval.hpp"
#include "genomebench/grpo.hpp"
#include "genomebench/ingest.hpp"
#include "genomebench/llm_bridge.hpp"
#include "genomebench/mcq.hpp"
#include "genomebench/reward.hpp"
#include "genomebench/router.hpp"
#include "json.hpp"

namespace gb = genomebench;
namespace fs = std::filesystem;

namespace {

#ifndef GENOMEBENCH_VERSION
#define GENOMEBENCH_VERSION "dev"
#endif

int g_log_level = 1;  // 0 quiet, 1 info, 2 debug

void log_info(const std::string& message) {
    if (g_log_level >= 1) std::cerr << "[genomebench] " << message << '\n';
}

struct Manifest {
    std::string subcommand;
    std::uint64_t seed = 0;
    nlohmann::json config = nlohmann::json::object();
    std::map<std::string, std::string> inputs;
    std::vector<std::string> outputs;

    void add_input(const fs::path& path) {
        inputs[path.string()] = "fnv64:" + gb::hex64(gb::fnv1a64(gb::read_text_file(path.string())));
    }

    void write(const fs::path& path) const {
        nlohmann::json j{{"tool", "genomebench"},
                         {"version", GENOMEBENCH_VERSION},
                         {"subcommand", subcommand},
                         {"seed", seed},
                         {"config", config},
                         {"inputs", inputs},
                         {"outputs", outputs}};
        gb::write_text_file(path.string(), j.dump(2) + "\n");
    }
};

fs::path manifest_path_for(const fs::path& out) {
    if (fs::is_directory(out)) return out / "manifest.json";
    return fs::path(out.string() + ".manifest.json");
}

std::unique_ptr<gb::bridge::CompletionBackend> make_backend(const std::string& kind,
                                                            const std::string& mock_rules,
                                                            const std::string& api_base,
                                                            const std::string& model) {
    if (kind == "mock") {
        if (mock_rules.empty()) {
            throw gb::Error("InvalidConfig", "mock backend needs --mock-rules <json>");
        }
        return std::make_unique<gb::bridge::MockBackend>(gb::bridge::MockBackend::load(mock_rules));
    }
    if (kind == "remote") {
        gb::bridge::RemoteConfig config;
        config.base_url = api_base;
        config.model = model;
        return std::make_unique<gb::bridge::RemoteBackend>(config);
    }
    throw gb::Error("InvalidConfig", "backend must be mock or remote, got " + kind);
}

std::vector<std::pair<std::string, std::string>> read_questions_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw gb::Error("IoError", "cannot open " + path.string());
    std::vector<std::pair<std::string, std::string>> questions;  // (id, text)
    std::string line;
    int lineNo = 0;
    while (std::getline(in, line)) {
        ++lineNo;
        if (gb::trim(line).empty()) continue;
        const nlohmann::json j = nlohmann::json::parse(line);
        std::string id = j.contains("question_id") ? j["question_id"].get<std::string>()
                         : j.contains("id")        ? j["id"].get<std::string>()
                                                   : "line" + std::to_string(lineNo);
        const std::string text =
            j.contains("question") ? j["question"].get<std::string>() : j.at("text").get<std::string>();
        questions.emplace_back(std::move(id), text);
    }
    return questions;
}

// ---- subcommand implementations ----

struct GlobalOpts {
    std::uint64_t seed = 0;
    int parallelism = 1;
};

int cmd_ingest(const fs::path& in, const fs::path& out, bool anonymize, const GlobalOpts& global) {
    const bool fromStdin = in == "-";
    gb::ingest::ParseResult result;
    std::string stdinBytes;
    if (fromStdin) {
        stdinBytes.assign(std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>());
        std::istringstream stream(stdinBytes);
        result = gb::ingest::parse_mbox(stream);
    } else {
        result = gb::ingest::parse_mbox_file(in);
    }
    if (anonymize) {
        for (gb::ingest::EmailThread& thread : result.threads) {
            thread = gb::ingest::anonymize_thread(thread).first;
        }
    }
    gb::ingest::write_threads(out, result.threads);
    log_info("ingest: read " + std::to_string(result.report.messages_read) + " messages, dropped " +
             std::to_string(result.report.messages_dropped) + ", formed " +
             std::to_string(result.report.threads_formed) + " threads");

    Manifest manifest;
    manifest.subcommand = "ingest";
    manifest.seed = global.seed;
    manifest.config = {{"in", in.string()}, {"out", out.string()}, {"anonymize", anonymize}};
    if (fromStdin) {
        manifest.inputs["<stdin>"] = "fnv64:" + gb::hex64(gb::fnv1a64(stdinBytes));
    } else {
        manifest.add_input(in);
    }
    manifest.outputs.push_back(out.string());
    manifest.write(manifest_path_for(out));
    return 0;
}

int cmd_build_mcq(const fs::path& triples_path, const fs::path& out, std::uint64_t seed,
                  const std::string& backend_kind, const std::string& mock_rules,
                  const std::string& api_base, const std::string& model, double gold_threshold,
                  const GlobalOpts& global) {
    const auto backend = make_backend(backend_kind, mock_rules, api_base, model);
    const std::vector<gb::bridge::QaTriple> raw = gb::bridge::read_triples(triples_path);

    const gb::curation::UnansweredResult answered = gb::curation::drop_unanswered(raw);
    log_info("build-mcq: " + std::to_string(answered.dropped.size()) + " unanswered triples dropped");

    std::vector<gb::mcq::McqItem> items;
    int failures = 0;
    for (std::size_t i = 0; i < answered.kept.size(); ++i) {
        const gb::bridge::QaTriple& triple = answered.kept[i];
        try {
            const std::string question = gb::bridge::rewrite_question(triple, *backend);
            const gb::mcq::OptionSet options =
                gb::bridge::generate_options(question, triple.answer, *backend, gold_threshold);
            items.push_back(gb::mcq::assemble_mcq(question, options, triple.answer,
                                                  seed + static_cast<std::uint64_t>(i)));
        } catch (const gb::Error& e) {
            ++failures;
            log_info("build-mcq: triple " + std::to_string(i) + " skipped (" + e.code() + ")");
        }
    }
    gb::mcq::write_items(out, items);
    log_info("build-mcq: built " + std::to_string(items.size()) + " items, " +
             std::to_string(failures) + " failures");

    Manifest manifest;
    manifest.subcommand = "build-mcq";
    manifest.seed = seed;
    manifest.config = {{"triples", triples_path.string()}, {"out", out.string()},
                       {"backend", backend_kind},          {"gold_threshold", gold_threshold}};
    manifest.add_input(triples_path);
    if (!mock_rules.empty()) manifest.add_input(mock_rules);
    manifest.outputs.push_back(out.string());
    manifest.write(manifest_path_for(out));
    (void)global;
    return 0;
}

int cmd_curate(const fs::path& in, const fs::path& out, double dedup_threshold,
               double test_fraction, std::uint64_t seed, const fs::path& table_path) {
    const gb::curation::KeywordTable table = gb::curation::KeywordTable::load(table_path);
    const std::vector<gb::mcq::McqItem> input = gb::mcq::read_items(in);

    const gb::curation::QualityResult quality = gb::curation::drop_low_quality(input, table);
    const gb::curation::DedupResult dedup = gb::curation::near_dedup(quality.kept, dedup_threshold);

    std::vector<gb::mcq::McqItem> annotated = dedup.kept;
    int fallbackCount = 0;
    for (gb::mcq::McqItem& item : annotated) {
        const auto assignment = gb::curation::assign_category(item.question_prompt(), table);
        item.category = assignment.category;
        if (assignment.fallback) ++fallbackCount;
        item.difficulty = gb::curation::assign_difficulty(item.question_prompt(), table);
    }

    const gb::curation::SplitResult split =
        gb::curation::split_dataset(annotated, test_fraction, seed);

    std::vector<gb::mcq::McqItem> all = split.train;
    all.insert(all.end(), split.test.begin(), split.test.end());
    gb::mcq::write_items(out, all);

    log_info("curate: " + std::to_string(input.size()) + " in, " +
             std::to_string(quality.dropped.size()) + " low-quality, " +
             std::to_string(quality.kept.size() - dedup.kept.size()) + " duplicates, split " +
             std::to_string(split.train.size()) + "/" + std::to_string(split.test.size()) +
             ", fallback categories " + std::to_string(fallbackCount));

    Manifest manifest;
    manifest.subcommand = "curate";
    manifest.seed = seed;
    manifest.config = {{"in", in.string()},
                       {"out", out.string()},
                       {"dedup_threshold", dedup_threshold},
                       {"test_fraction", test_fraction},
                       {"keyword_table", table_path.string()}};
    manifest.add_input(in);
    manifest.add_input(table_path);
    manifest.outputs.push_back(out.string());
    manifest.write(manifest_path_for(out));
    return 0;
}

int cmd_reward(const fs::path& responses_path, const fs::path& gold_path, const fs::path& out) {
    // gold: full MCQ items or {"question_id","gold"} records
    std::map<std::string, char> golds;
    {
        std::ifstream in(gold_path);
        if (!in) throw gb::Error("IoError", "cannot open " + gold_path.string());
        std::string line;
        while (std::getline(in, line)) {
            if (gb::trim(line).empty()) continue;
            const nlohmann::json j = nlohmann::json::parse(line);
            const std::string id = j.contains("question_id") ? j["question_id"].get<std::string>()
                                                             : j.at("id").get<std::string>();
            const std::string label = j.contains("correct_label")
                                          ? j["correct_label"].get<std::string>()
                                          : j.at("gold").get<std::string>();
            if (label.size() != 1) throw gb::Error("InvalidConfig", "bad gold label for " + id);
            golds[id] = label[0];
        }
    }

    std::ifstream in(responses_path);
    if (!in) throw gb::Error("IoError", "cannot open " + responses_path.string());
    std::ofstream output(out, std::ios::binary);
    if (!output) throw gb::Error("IoError", "cannot write " + out.string());

    std::string line;
    long count = 0;
    while (std::getline(in, line)) {
        if (gb::trim(line).empty()) continue;
        const nlohmann::json j = nlohmann::json::parse(line);
        const std::string id = j.at("question_id").get<std::string>();
        const std::string response = j.at("response").get<std::string>();
        const auto goldIt = golds.find(id);
        if (goldIt == golds.end()) {
            throw gb::Error("UnknownQuestion", "no gold label for " + id);
        }
        const gb::reward::RewardBreakdown breakdown =
            gb::reward::score_response(response, goldIt->second);
        nlohmann::json row{{"question_id", id},
                           {"format_reward", breakdown.format_reward},
                           {"correctness_reward", breakdown.correctness_reward},
                           {"total", breakdown.total},
                           {"extracted_label", nullptr},
                           {"invalid", breakdown.invalid}};
        if (breakdown.extracted_label) {
            row["extracted_label"] = std::string(1, *breakdown.extracted_label);
        }
        output << row.dump() << '\n';
        ++count;
    }
    log_info("reward: scored " + std::to_string(count) + " responses");

    Manifest manifest;
    manifest.subcommand = "reward";
    manifest.config = {{"responses", responses_path.string()},
                       {"gold", gold_path.string()},
                       {"out", out.string()}};
    manifest.add_input(responses_path);
    manifest.add_input(gold_path);
    manifest.outputs.push_back(out.string());
    manifest.write(manifest_path_for(out));
    return 0;
}

int cmd_evaluate(const fs::path& items_path, const std::string& backend_kind, int runs,
                 std::vector<int> ks, const fs::path& out_dir, const std::string& mock_rules,
                 const std::string& api_base, const std::string& model, const GlobalOpts& global) {
    fs::create_directories(out_dir);
    const auto backend = make_backend(backend_kind, mock_rules, api_base, model);
    const std::vector<gb::mcq::McqItem> items = gb::mcq::read_items(items_path);

    gb::eval::RunOptions options;
    options.runs = runs;
    options.seed = global.seed;
    options.parallelism = global.parallelism;
    options.journal = out_dir / "records.jsonl";

    const std::vector<gb::eval::EvalRecord> records = gb::eval::run_eval(items, *backend, options);
    gb::eval::write_records(out_dir / "records.jsonl", records);

    for (int k : ks) {
        if (k > runs) throw gb::Error("InvalidConfig", "K=" + std::to_string(k) + " exceeds runs");
    }
    const gb::eval::EvalReport report = gb::eval::make_report(records, items, ks);
    gb::write_text_file((out_dir / "report.json").string(), report.to_json().dump(2) + "\n");
    gb::write_text_file((out_dir / "report.csv").string(), report.to_csv());
    log_info("evaluate: accuracy " + std::to_string(report.overall_accuracy) + ", invalid rate " +
             std::to_string(report.invalid_rate));

    Manifest manifest;
    manifest.subcommand = "evaluate";
    manifest.seed = global.seed;
    manifest.config = {{"items", items_path.string()},
                       {"backend", backend_kind},
                       {"runs", runs},
                       {"ks", ks}};
    manifest.add_input(items_path);
    if (!mock_rules.empty()) manifest.add_input(mock_rules);
    for (const char* name : {"records.jsonl", "report.json", "report.csv"}) {
        manifest.outputs.push_back((out_dir / name).string());
    }
    manifest.write(out_dir / "manifest.json");
    return 0;
}

int cmd_train_grpo(const fs::path& data_path, const fs::path& out_dir,
                   const gb::grpo::GrpoConfig& config, double weight_decay, int feature_dim,
                   const GlobalOpts& global) {
    fs::create_directories(out_dir);

    // Data rows: {"features":[...], "gold":"c"|2} or {"question":"...","gold":"c"}
    std::vector<gb::grpo::TrainItem> items;
    int maxFeature = 0;
    {
        std::ifstream in(data_path);
        if (!in) throw gb::Error("IoError", "cannot open " + data_path.string());
        std::string line;
        while (std::getline(in, line)) {
            if (gb::trim(line).empty()) continue;
            const nlohmann::json j = nlohmann::json::parse(line);
            gb::grpo::TrainItem item;
            if (j.contains("features")) {
                const auto dense = j["features"].get<std::vector<double>>();
                item.features = gb::grpo::dense_features(dense);
                maxFeature = std::max(maxFeature, static_cast<int>(dense.size()));
            } else {
                item.features = gb::router::featurize(j.at("question").get<std::string>(), feature_dim);
                maxFeature = feature_dim;
            }
            const nlohmann::json& gold = j.at("gold");
            if (gold.is_string()) {
                const std::string label = gold.get<std::string>();
                if (label.size() != 1 || label[0] < 'a' || label[0] > 'e') {
                    throw gb::Error("InvalidConfig", "gold letter must be a-e");
                }
                item.gold_action = label[0] - 'a';
            } else {
                item.gold_action = gold.get<int>();
            }
            items.push_back(std::move(item));
        }
    }
    if (items.empty()) throw gb::Error("InvalidConfig", "no training rows in " + data_path.string());

    gb::grpo::CategoricalPolicy policy(maxFeature, 5);
    gb::grpo::TrainOptions options;
    options.seed = global.seed;
    options.optimizer.weight_decay = weight_decay;
    const gb::grpo::TrainingLog log = gb::grpo::train_grpo(policy, items, config, std::move(options));

    std::ostringstream csv;
    log.write_csv(csv);
    gb::write_text_file((out_dir / "training_log.csv").string(), csv.str());
    gb::write_text_file((out_dir / "policy.json").string(),
                        gb::grpo::policy_to_json(policy).dump() + "\n");
    log_info("train-grpo: final accuracy " + std::to_string(log.rows.back().accuracy));

    Manifest manifest;
    manifest.subcommand = "train-grpo";
    manifest.seed = global.seed;
    manifest.config = {{"data", data_path.string()},
                       {"group_size", config.group_size},
                       {"clip_eps", config.clip_eps},
                       {"kl_beta", config.kl_beta},
                       {"learning_rate", config.learning_rate},
                       {"epochs", config.epochs},
                       {"sampling_temperature", config.sampling_temperature},
                       {"weight_decay", weight_decay}};
    manifest.add_input(data_path);
    manifest.outputs = {(out_dir / "policy.json").string(), (out_dir / "training_log.csv").string()};
    manifest.write(out_dir / "manifest.json");
    return 0;
}

int cmd_train_router(const fs::path& responses_path, const fs::path& questions_path,
                     const fs::path& out_dir, gb::grpo::GrpoConfig config, int feature_dim,
                     const GlobalOpts& global) {
    fs::create_directories(out_dir);
    const gb::router::ExpertResponses responses = gb::router::read_expert_responses(responses_path);
    const auto questionRows = read_questions_file(questions_path);

    std::map<std::string, std::string> textById;
    for (const auto& [id, text] : questionRows) textById[id] = text;
    std::vector<std::string> questions;
    for (const std::string& id : responses.question_ids) {
        const auto it = textById.find(id);
        if (it == textById.end()) {
            throw gb::Error("InvalidConfig", "question text missing for " + id);
        }
        questions.push_back(it->second);
    }

    gb::router::RouterTrainResult result =
        gb::router::train_router(responses, questions, config, global.seed, feature_dim);

    std::ostringstream csv;
    result.log.write_csv(csv);
    gb::write_text_file((out_dir / "training_log.csv").string(), csv.str());
    gb::write_text_file((out_dir / "policy.json").string(),
                        gb::grpo::policy_to_json(result.policy).dump() + "\n");

    const gb::router::RoutedEvalReport report =
        gb::router::route_and_report(result.policy, responses, questions, feature_dim);
    gb::write_text_file((out_dir / "routing_report.json").string(), report.to_json().dump(2) + "\n");
    log_info("train-router: routed accuracy " + std::to_string(report.routed_accuracy) +
             " vs best single " + std::to_string(report.best_single_accuracy));

    Manifest manifest;
    manifest.subcommand = "train-router";
    manifest.seed = global.seed;
    manifest.config = {{"responses", responses_path.string()},
                       {"questions", questions_path.string()},
                       {"group_size", config.group_size},
                       {"feature_dim", feature_dim},
                       {"learning_rate", config.learning_rate},
                       {"epochs", config.epochs}};
    manifest.add_input(responses_path);
    manifest.add_input(questions_path);
    manifest.outputs = {(out_dir / "policy.json").string(),
                        (out_dir / "training_log.csv").string(),
                        (out_dir / "routing_report.json").string()};
    manifest.write(out_dir / "manifest.json");
    return 0;
}

int cmd_route(const fs::path& policy_path, const fs::path& questions_path,
              const fs::path& responses_path, const fs::path& out, int feature_dim) {
    const gb::grpo::CategoricalPolicy policy =
        gb::grpo::policy_from_json(nlohmann::json::parse(gb::read_text_file(policy_path.string())));
    const auto questionRows = read_questions_file(questions_path);

    std::ofstream output(out, std::ios::binary);
    if (!output) throw gb::Error("IoError", "cannot write " + out.string());
    for (const auto& [id, text] : questionRows) {
        const int choice = policy.greedy_action(gb::router::featurize(text, feature_dim));
        output << nlohmann::json{{"question_id", id}, {"expert", choice}}.dump() << '\n';
    }

    Manifest manifest;
    manifest.subcommand = "route";
    manifest.config = {{"policy", policy_path.string()}, {"questions", questions_path.string()}};
    manifest.add_input(policy_path);
    manifest.add_input(questions_path);
    manifest.outputs.push_back(out.string());

    if (!responses_path.empty()) {
        const gb::router::ExpertResponses responses =
            gb::router::read_expert_responses(responses_path);
        std::map<std::string, std::string> textById;
        for (const auto& [id, text] : questionRows) textById[id] = text;
        std::vector<std::string> questions;
        for (const std::string& id : responses.question_ids) questions.push_back(textById.at(id));
        const gb::router::RoutedEvalReport report =
            gb::router::route_and_report(policy, responses, questions, feature_dim);
        const fs::path reportPath = out.parent_path() / "routing_report.json";
        gb::write_text_file(reportPath.string(), report.to_json().dump(2) + "\n");
        manifest.add_input(responses_path);
        manifest.outputs.push_back(reportPath.string());
        log_info("route: routed accuracy " + std::to_string(report.routed_accuracy));
    }
    manifest.write(manifest_path_for(out));
    return 0;
}

int cmd_report(const fs::path& records_path, const fs::path& items_path, const fs::path& out_dir,
               const std::vector<int>& ks) {
    fs::create_directories(out_dir);
    const std::vector<gb::eval::EvalRecord> records = gb::eval::read_records(records_path);
    const std::vector<gb::mcq::McqItem> items = gb::mcq::read_items(items_path);
    const gb::eval::EvalReport report = gb::eval::make_report(records, items, ks);
    gb::write_text_file((out_dir / "report.json").string(), report.to_json().dump(2) + "\n");
    gb::write_text_file((out_dir / "report.csv").string(), report.to_csv());
    log_info("report: accuracy " + std::to_string(report.overall_accuracy) + " over " +
             std::to_string(report.record_count) + " records");

    Manifest manifest;
    manifest.subcommand = "report";
    manifest.config = {{"records", records_path.string()}, {"items", items_path.string()}};
    manifest.add_input(records_path);
    manifest.add_input(items_path);
    manifest.outputs = {(out_dir / "report.json").string(), (out_dir / "report.csv").string()};
    manifest.write(out_dir / "manifest.json");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Forum-to-benchmark pipeline, rule-based rewards, GRPO training, expert routing, "
                 "and MCQ evaluation"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand
    app.set_config("--config", "", "TOML/INI config file mirroring the flags");
    app.set_version_flag("--version", std::string(GENOMEBENCH_VERSION));
    app.failure_message(CLI::FailureMessage::simple);

    GlobalOpts global;
    std::string logLevel = "info";
    app.add_option("--seed", global.seed, "Seed recorded into every output manifest");
    app.add_option("--parallelism", global.parallelism, "Worker count for evaluation")
        ->check(CLI::PositiveNumber);
    app.add_option("--log-level", logLevel, "quiet|info|debug");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Parse an mbox archive into thread JSONL");
    fs::path ingestIn, ingestOut;
    bool anonymize = false;
    ingest->add_option("--in", ingestIn, "mbox file")->required();
    ingest->add_option("--out", ingestOut, "thread JSONL output")->required();
    ingest->add_flag("--anonymize", anonymize, "Replace sender identities with aliases");

    // build-mcq
    auto* buildMcq = app.add_subcommand("build-mcq", "Turn QA triples into five-option items");
    fs::path triplesPath, buildOut;
    std::uint64_t buildSeed = 0;
    std::string buildBackend = "mock", mockRules, apiBase, model;
    double goldThreshold = 0.5;
    buildMcq->add_option("--triples", triplesPath, "QA triple JSONL")->required();
    buildMcq->add_option("--out", buildOut, "item JSONL output")->required();
    buildMcq->add_option("--seed", buildSeed, "Shuffle seed")->required();
    buildMcq->add_option("--backend", buildBackend, "mock|remote");
    buildMcq->add_option("--mock-rules", mockRules, "Mock backend rule file");
    buildMcq->add_option("--api-base", apiBase, "Remote API base URL");
    buildMcq->add_option("--model", model, "Remote model name");
    buildMcq->add_option("--gold-threshold", goldThreshold, "Gold-match token overlap threshold");

    // curate
    auto* curate = app.add_subcommand("curate", "Filter, dedup, annotate, and split items");
    fs::path curateIn, curateOut, tablePath = "assets/keyword_table.json";
    double dedupThreshold = 0.9, testFraction = 0.2;
    std::uint64_t curateSeed = 0;
    curate->add_option("--in", curateIn, "item JSONL")->required();
    curate->add_option("--out", curateOut, "curated JSONL output")->required();
    curate->add_option("--dedup-threshold", dedupThreshold, "3-gram Jaccard threshold");
    curate->add_option("--test-fraction", testFraction, "Test-side fraction (floored)");
    curate->add_option("--seed", curateSeed, "Split shuffle seed")->required();
    curate->add_option("--keyword-table", tablePath, "Category/difficulty config JSON");

    // reward
    auto* rewardCmd = app.add_subcommand("reward", "Score responses with the rule-based reward");
    fs::path responsesPath, goldPath, rewardOut;
    rewardCmd->add_option("--responses", responsesPath, "JSONL {question_id, response}")->required();
    rewardCmd->add_option("--gold", goldPath, "Item JSONL or {question_id, gold}")->required();
    rewardCmd->add_option("--out", rewardOut, "RewardBreakdown JSONL output")->required();

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "Run a backend over items and report metrics");
    fs::path itemsPath, evalOut;
    std::string evalBackend = "mock", evalMockRules, evalApiBase, evalModel;
    int runs = 1;
    std::vector<int> ks;
    evaluate->add_option("--items", itemsPath, "Item JSONL")->required();
    evaluate->add_option("--backend", evalBackend, "mock|remote")->required();
    evaluate->add_option("--runs", runs, "Runs per item");
    evaluate->add_option("--ks", ks, "Pass@K values")->delimiter(',');
    evaluate->add_option("--out", evalOut, "Output directory")->required();
    evaluate->add_option("--mock-rules", evalMockRules, "Mock backend rule file");
    evaluate->add_option("--api-base", evalApiBase, "Remote API base URL");
    evaluate->add_option("--model", evalModel, "Remote model name");

    // train-grpo
    auto* trainGrpo = app.add_subcommand("train-grpo", "GRPO training on a letter-labeled dataset");
    fs::path grpoData, grpoOut;
    gb::grpo::GrpoConfig grpoConfig;
    double weightDecay = 0.01;
    int grpoFeatureDim = 1 << 10;
    trainGrpo->add_option("--data", grpoData, "JSONL {features|question, gold}")->required();
    trainGrpo->add_option("--out", grpoOut, "Output directory")->required();
    trainGrpo->add_option("--group-size", grpoConfig.group_size, "Samples per question (G)");
    trainGrpo->add_option("--clip-eps", grpoConfig.clip_eps, "Surrogate clip width");
    trainGrpo->add_option("--kl-beta", grpoConfig.kl_beta, "KL penalty weight");
    trainGrpo->add_option("--learning-rate", grpoConfig.learning_rate, "AdamW learning rate");
    trainGrpo->add_option("--epochs", grpoConfig.epochs, "Epochs over the dataset");
    trainGrpo->add_option("--temperature", grpoConfig.sampling_temperature, "Sampling temperature");
    trainGrpo->add_option("--std-floor", grpoConfig.std_floor, "Advantage std floor");
    trainGrpo->add_option("--weight-decay", weightDecay, "AdamW decoupled decay");
    trainGrpo->add_option("--feature-dim", grpoFeatureDim, "Hashed feature dim for text rows");

    // train-router
    auto* trainRouter = app.add_subcommand("train-router", "Train the expert-selection policy");
    fs::path routerResponses, routerQuestions, routerOut;
    gb::grpo::GrpoConfig routerConfig;
    routerConfig.group_size = 8;
    int routerFeatureDim = 1 << 14;
    trainRouter->add_option("--responses", routerResponses, "Pre-generated expert responses JSONL")
        ->required();
    trainRouter->add_option("--questions", routerQuestions, "Question JSONL")->required();
    trainRouter->add_option("--out", routerOut, "Output directory")->required();
    trainRouter->add_option("--group-size", routerConfig.group_size, "Samples per question (G)");
    trainRouter->add_option("--learning-rate", routerConfig.learning_rate, "AdamW learning rate");
    trainRouter->add_option("--epochs", routerConfig.epochs, "Epochs");
    trainRouter->add_option("--kl-beta", routerConfig.kl_beta, "KL penalty weight");
    trainRouter->add_option("--temperature", routerConfig.sampling_temperature, "Sampling temperature");
    trainRouter->add_option("--feature-dim", routerFeatureDim, "Hashed feature dim");

    // route
    auto* route = app.add_subcommand("route", "Greedy routing with a trained policy");
    fs::path routePolicy, routeQuestions, routeResponses, routeOut = "selections.jsonl";
    int routeFeatureDim = 1 << 14;
    route->add_option("--policy", routePolicy, "Trained policy JSON")->required();
    route->add_option("--questions", routeQuestions, "Question JSONL")->required();
    route->add_option("--responses", routeResponses, "Expert responses (adds accuracy report)");
    route->add_option("--out", routeOut, "Selection JSONL output");
    route->add_option("--feature-dim", routeFeatureDim, "Hashed feature dim");

    // report
    auto* reportCmd = app.add_subcommand("report", "Aggregate eval records into reports");
    fs::path reportRecords, reportItems, reportOut;
    std::vector<int> reportKs;
    reportCmd->add_option("--records", reportRecords, "Eval record JSONL")->required();
    reportCmd->add_option("--items", reportItems, "Item JSONL")->required();
    reportCmd->add_option("--out", reportOut, "Output directory")->required();
    reportCmd->add_option("--ks", reportKs, "Pass@K values")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (logLevel == "quiet") g_log_level = 0;
    if (logLevel == "debug") g_log_level = 2;

    try {
        if (*ingest) return cmd_ingest(ingestIn, ingestOut, anonymize, global);
        if (*buildMcq) {
            return cmd_build_mcq(triplesPath, buildOut, buildSeed, buildBackend, mockRules, apiBase,
                                 model, goldThreshold, global);
        }
        if (*curate) {
            return cmd_curate(curateIn, curateOut, dedupThreshold, testFraction, curateSeed,
                              tablePath);
        }
        if (*rewardCmd) return cmd_reward(responsesPath, goldPath, rewardOut);
        if (*evaluate) {
            return cmd_evaluate(itemsPath, evalBackend, runs, ks, evalOut, evalMockRules,
                                evalApiBase, evalModel, global);
        }
        if (*trainGrpo) {
            return cmd_train_grpo(grpoData, grpoOut, grpoConfig, weightDecay, grpoFeatureDim,
                                  global);
        }
        if (*trainRouter) {
            return cmd_train_router(routerResponses, routerQuestions, routerOut, routerConfig,
                                    routerFeatureDim, global);
        }
        if (*route) {
            return cmd_route(routePolicy, routeQuestions, routeResponses, routeOut, routeFeatureDim);
        }
        if (*reportCmd) return cmd_report(reportRecords, reportItems, reportOut, reportKs);
    } catch (const gb::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
