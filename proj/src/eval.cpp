#include "genomebench/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "genomebench/prompts.hpp"

namespace genomebench::eval {

namespace {

struct ItemView {
    char gold = 'a';
    std::optional<Category> category;
    std::optional<Difficulty> difficulty;
    std::size_t order = 0;
};

std::unordered_map<std::string, ItemView> index_items(std::span<const mcq::McqItem> items) {
    std::unordered_map<std::string, ItemView> index;
    for (std::size_t i = 0; i < items.size(); ++i) {
        index[items[i].id] = {items[i].correct_label, items[i].category, items[i].difficulty, i};
    }
    return index;
}

}  // namespace

nlohmann::json record_to_json(const EvalRecord& record) {
    nlohmann::json j{{"question_id", record.question_id},
                     {"run", record.run_index},
                     {"response", record.raw_response},
                     {"extracted_label", nullptr},
                     {"correct", record.correct},
                     {"reward",
                      {{"format", record.reward.format_reward},
                       {"correctness", record.reward.correctness_reward},
                       {"total", record.reward.total},
                       {"invalid", record.reward.invalid}}},
                     {"latency_ms", record.latency_ms}};
    if (record.extracted_label) j["extracted_label"] = std::string(1, *record.extracted_label);
    return j;
}

EvalRecord record_from_json(const nlohmann::json& j) {
    EvalRecord record;
    record.question_id = j.at("question_id").get<std::string>();
    record.run_index = j.at("run").get<int>();
    record.raw_response = j.value("response", std::string());
    if (j.contains("extracted_label") && j["extracted_label"].is_string()) {
        const std::string label = j["extracted_label"].get<std::string>();
        if (!label.empty()) record.extracted_label = label[0];
    }
    record.correct = j.at("correct").get<bool>();
    if (j.contains("reward")) {
        const nlohmann::json& r = j["reward"];
        record.reward.format_reward = r.value("format", 0);
        record.reward.correctness_reward = r.value("correctness", 0);
        record.reward.total = r.value("total", 0);
        record.reward.invalid = r.value("invalid", false);
        record.reward.extracted_label = record.extracted_label;
    }
    record.latency_ms = j.value("latency_ms", 0L);
    return record;
}

PromptPair build_prompt(const mcq::McqItem& item) {
    return {std::string(prompts::kEvalSystem), item.question_text};
}

std::vector<EvalRecord> run_eval(std::span<const mcq::McqItem> items,
                                 bridge::CompletionBackend& backend, const RunOptions& options) {
    if (options.runs < 1) throw Error("InvalidConfig", "runs must be >= 1");
    const int parallelism = std::max(1, options.parallelism);

    // Resume: skip (question_id, run) pairs already journaled.
    std::vector<EvalRecord> existing;
    std::set<std::pair<std::string, int>> done;
    if (!options.journal.empty() && std::filesystem::exists(options.journal)) {
        existing = read_records(options.journal);
        for (const EvalRecord& record : existing) {
            done.emplace(record.question_id, record.run_index);
        }
    }

    struct Task {
        std::size_t item_index;
        int run;
    };
    std::vector<Task> tasks;
    for (std::size_t i = 0; i < items.size(); ++i) {
        for (int run = 0; run < options.runs; ++run) {
            if (done.count({items[i].id, run}) == 0) tasks.push_back({i, run});
        }
    }

    std::vector<EvalRecord> produced(tasks.size());
    std::vector<char> ready(tasks.size(), 0);
    std::mutex mutex;
    std::condition_variable readyCv;
    std::atomic<std::size_t> nextTask{0};
    std::exception_ptr failure;

    const auto worker = [&]() {
        while (true) {
            const std::size_t t = nextTask.fetch_add(1);
            if (t >= tasks.size()) return;
            const Task& task = tasks[t];
            const mcq::McqItem& item = items[task.item_index];
            try {
                const PromptPair prompt = build_prompt(item);
                bridge::CompletionRequest request;
                request.system_prompt = prompt.system;
                request.user_prompt = prompt.user;
                request.seed = fnv1a64(item.id, options.seed ^
                                                    (static_cast<std::uint64_t>(task.run) * 0x9e3779b9ULL));
                const auto start = std::chrono::steady_clock::now();
                const std::string response = backend.complete(request);
                const long latency = static_cast<long>(
                    std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - start)
                        .count());

                EvalRecord record;
                record.question_id = item.id;
                record.run_index = task.run;
                record.raw_response = response;
                record.reward = reward::score_response(response, item.correct_label);
                record.extracted_label = record.reward.extracted_label;
                record.correct = record.extracted_label &&
                                 *record.extracted_label == item.correct_label;
                record.latency_ms = latency;

                std::lock_guard<std::mutex> lock(mutex);
                produced[t] = std::move(record);
                ready[t] = 1;
                readyCv.notify_all();
            } catch (...) {
                std::lock_guard<std::mutex> lock(mutex);
                if (!failure) failure = std::current_exception();
                ready[t] = 2;
                readyCv.notify_all();
            }
        }
    };

    std::vector<std::thread> workers;
    for (int w = 0; w < parallelism; ++w) workers.emplace_back(worker);

    // Journal in task order: only the contiguous prefix is persisted, which
    // keeps the file deterministic while staying resumable.
    std::ofstream journal;
    if (!options.journal.empty()) {
        journal.open(options.journal, std::ios::binary | std::ios::app);
        if (!journal) throw Error("IoError", "cannot open journal " + options.journal.string());
    }
    {
        std::unique_lock<std::mutex> lock(mutex);
        for (std::size_t t = 0; t < tasks.size(); ++t) {
            readyCv.wait(lock, [&] { return ready[t] != 0; });
            if (ready[t] == 2) break;
            if (journal.is_open()) {
                journal << record_to_json(produced[t]).dump() << '\n';
                journal.flush();
            }
        }
    }
    for (std::thread& thread : workers) thread.join();
    if (failure) std::rethrow_exception(failure);

    std::vector<EvalRecord> all = std::move(existing);
    for (EvalRecord& record : produced) all.push_back(std::move(record));

    const auto index = index_items(items);
    std::sort(all.begin(), all.end(), [&](const EvalRecord& a, const EvalRecord& b) {
        const std::size_t oa = index.count(a.question_id) ? index.at(a.question_id).order : items.size();
        const std::size_t ob = index.count(b.question_id) ? index.at(b.question_id).order : items.size();
        if (oa != ob) return oa < ob;
        return a.run_index < b.run_index;
    });
    return all;
}

std::vector<std::pair<int, double>> pass_at_k(std::span<const EvalRecord> records,
                                              std::span<const int> ks) {
    if (ks.empty()) throw Error("InvalidConfig", "no K values given");
    int maxK = 0;
    for (int k : ks) {
        if (k < 1) throw Error("InvalidConfig", "K must be >= 1");
        maxK = std::max(maxK, k);
    }

    // question -> correctness by run index
    std::unordered_map<std::string, std::vector<std::optional<bool>>> byQuestion;
    std::vector<std::string> order;
    for (const EvalRecord& record : records) {
        auto it = byQuestion.find(record.question_id);
        if (it == byQuestion.end()) {
            it = byQuestion.emplace(record.question_id, std::vector<std::optional<bool>>()).first;
            order.push_back(record.question_id);
        }
        auto& runs = it->second;
        if (runs.size() <= static_cast<std::size_t>(record.run_index)) {
            runs.resize(static_cast<std::size_t>(record.run_index) + 1);
        }
        runs[static_cast<std::size_t>(record.run_index)] = record.correct;
    }

    for (const std::string& question : order) {
        const auto& runs = byQuestion.at(question);
        for (int run = 0; run < maxK; ++run) {
            if (static_cast<std::size_t>(run) >= runs.size() ||
                !runs[static_cast<std::size_t>(run)].has_value()) {
                throw InsufficientRuns(question, run, maxK);
            }
        }
    }

    std::vector<std::pair<int, double>> table;
    for (int k : ks) {
        std::size_t passed = 0;
        for (const std::string& question : order) {
            const auto& runs = byQuestion.at(question);
            for (int run = 0; run < k; ++run) {
                if (runs[static_cast<std::size_t>(run)].value()) {
                    ++passed;
                    break;
                }
            }
        }
        table.emplace_back(k, order.empty()
                                  ? 0.0
                                  : static_cast<double>(passed) / static_cast<double>(order.size()));
    }
    return table;
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json categories = nlohmann::json::object();
    for (const auto& [category, stats] : per_category) {
        categories[std::string(category_name(category))] = {
            {"records", stats.records}, {"correct", stats.correct}, {"accuracy", stats.accuracy}};
    }
    nlohmann::json difficulties = nlohmann::json::object();
    for (const auto& [difficulty, stats] : per_difficulty) {
        difficulties[std::string(difficulty_name(difficulty))] = {
            {"records", stats.records}, {"correct", stats.correct}, {"accuracy", stats.accuracy}};
    }
    nlohmann::json pass = nlohmann::json::object();
    for (const auto& [k, value] : pass_table) pass["pass@" + std::to_string(k)] = value;

    nlohmann::json histogram = nlohmann::json::object();
    for (std::size_t i = 0; i < gold_label_histogram.size(); ++i) {
        histogram[std::string(1, static_cast<char>('a' + i))] = gold_label_histogram[i];
    }
    return {{"overall_accuracy", overall_accuracy},
            {"invalid_rate", invalid_rate},
            {"records", record_count},
            {"per_category", categories},
            {"per_difficulty", difficulties},
            {"gold_label_histogram", histogram},
            {"pass_at_k", pass}};
}

std::string EvalReport::to_csv() const {
    std::ostringstream out;
    out << "kind,name,records,correct,accuracy\n";
    out << "overall,," << record_count << ',' << static_cast<long>(overall_accuracy * record_count + 0.5)
        << ',' << overall_accuracy << '\n';
    for (const auto& [category, stats] : per_category) {
        out << "category," << category_name(category) << ',' << stats.records << ',' << stats.correct
            << ',' << stats.accuracy << '\n';
    }
    for (const auto& [difficulty, stats] : per_difficulty) {
        out << "difficulty," << difficulty_name(difficulty) << ',' << stats.records << ','
            << stats.correct << ',' << stats.accuracy << '\n';
    }
    for (const auto& [k, value] : pass_table) {
        out << "pass_at_k," << k << ",,," << value << '\n';
    }
    return out.str();
}

EvalReport make_report(std::span<const EvalRecord> records, std::span<const mcq::McqItem> items,
                       std::span<const int> ks) {
    const auto index = index_items(items);

    EvalReport report;
    report.record_count = static_cast<long>(records.size());
    long correct = 0;
    long invalid = 0;
    for (const EvalRecord& record : records) {
        const auto it = index.find(record.question_id);
        if (it == index.end()) {
            throw Error("UnknownQuestion", "record references unknown question " + record.question_id);
        }
        correct += record.correct ? 1 : 0;
        invalid += record.reward.invalid ? 1 : 0;
        if (it->second.category) {
            StratumStats& stats = report.per_category[*it->second.category];
            stats.records += 1;
            stats.correct += record.correct ? 1 : 0;
        }
        if (it->second.difficulty) {
            StratumStats& stats = report.per_difficulty[*it->second.difficulty];
            stats.records += 1;
            stats.correct += record.correct ? 1 : 0;
        }
    }
    if (!records.empty()) {
        report.overall_accuracy = static_cast<double>(correct) / static_cast<double>(records.size());
        report.invalid_rate = static_cast<double>(invalid) / static_cast<double>(records.size());
    }
    for (auto& [category, stats] : report.per_category) {
        stats.accuracy = stats.records == 0
                             ? 0.0
                             : static_cast<double>(stats.correct) / static_cast<double>(stats.records);
    }
    for (auto& [difficulty, stats] : report.per_difficulty) {
        stats.accuracy = stats.records == 0
                             ? 0.0
                             : static_cast<double>(stats.correct) / static_cast<double>(stats.records);
    }
    for (const mcq::McqItem& item : items) {
        report.gold_label_histogram[static_cast<std::size_t>(item.correct_label - 'a')] += 1;
    }
    if (!ks.empty()) report.pass_table = pass_at_k(records, ks);
    return report;
}

void write_records(const std::filesystem::path& path, std::span<const EvalRecord> records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("IoError", "cannot write " + path.string());
    for (const EvalRecord& record : records) out << record_to_json(record).dump() << '\n';
}

std::vector<EvalRecord> read_records(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("IoError", "cannot open " + path.string());
    std::vector<EvalRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        records.push_back(record_from_json(nlohmann::json::parse(line)));
    }
    return records;
}

}  // namespace genomebench::eval
