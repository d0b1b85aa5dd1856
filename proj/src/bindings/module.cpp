#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "genomebench/curation.hpp"
#include "genomebench/eval.hpp"
#include "genomebench/grpo.hpp"
#include "genomebench/ingest.hpp"
#include "genomebench/llm_bridge.hpp"
#include "genomebench/mcq.hpp"
#include "genomebench/reward.hpp"
#include "genomebench/router.hpp"
#include "genomebench/taxonomy.hpp"

namespace py = pybind11;
namespace gb = genomebench;

namespace {

py::object json_to_py(const nlohmann::json& j) {
    switch (j.type()) {
        case nlohmann::json::value_t::null:
            return py::none();
        case nlohmann::json::value_t::boolean:
            return py::bool_(j.get<bool>());
        case nlohmann::json::value_t::number_integer:
            return py::int_(j.get<std::int64_t>());
        case nlohmann::json::value_t::number_unsigned:
            return py::int_(j.get<std::uint64_t>());
        case nlohmann::json::value_t::number_float:
            return py::float_(j.get<double>());
        case nlohmann::json::value_t::string:
            return py::str(j.get<std::string>());
        case nlohmann::json::value_t::array: {
            py::list list;
            for (const nlohmann::json& element : j) list.append(json_to_py(element));
            return list;
        }
        case nlohmann::json::value_t::object: {
            py::dict dict;
            for (const auto& [key, value] : j.items()) dict[py::str(key)] = json_to_py(value);
            return dict;
        }
        default:
            return py::none();
    }
}

nlohmann::json py_to_json(const py::handle& obj) {
    if (obj.is_none()) return nullptr;
    if (py::isinstance<py::bool_>(obj)) return obj.cast<bool>();
    if (py::isinstance<py::int_>(obj)) return obj.cast<std::int64_t>();
    if (py::isinstance<py::float_>(obj)) return obj.cast<double>();
    if (py::isinstance<py::str>(obj)) return obj.cast<std::string>();
    if (py::isinstance<py::dict>(obj)) {
        nlohmann::json out = nlohmann::json::object();
        for (const auto& item : obj.cast<py::dict>()) {
            out[item.first.cast<std::string>()] = py_to_json(item.second);
        }
        return out;
    }
    if (py::isinstance<py::list>(obj) || py::isinstance<py::tuple>(obj)) {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& item : obj.cast<py::sequence>()) out.push_back(py_to_json(item));
        return out;
    }
    throw py::type_error("unsupported value for JSON conversion");
}

gb::mcq::McqItem item_from_py(const py::dict& d) {
    return gb::mcq::item_from_json(py_to_json(d));
}

std::vector<gb::mcq::McqItem> items_from_py(const py::list& list) {
    std::vector<gb::mcq::McqItem> items;
    items.reserve(list.size());
    for (const auto& entry : list) items.push_back(item_from_py(entry.cast<py::dict>()));
    return items;
}

py::list items_to_py(const std::vector<gb::mcq::McqItem>& items) {
    py::list out;
    for (const gb::mcq::McqItem& item : items) out.append(json_to_py(gb::mcq::item_to_json(item)));
    return out;
}

gb::grpo::GrpoConfig config_from_py(const py::dict& d) {
    gb::grpo::GrpoConfig config;
    if (d.contains("group_size")) config.group_size = d["group_size"].cast<int>();
    if (d.contains("clip_eps")) config.clip_eps = d["clip_eps"].cast<double>();
    if (d.contains("kl_beta")) config.kl_beta = d["kl_beta"].cast<double>();
    if (d.contains("std_floor")) config.std_floor = d["std_floor"].cast<double>();
    if (d.contains("learning_rate")) config.learning_rate = d["learning_rate"].cast<double>();
    if (d.contains("epochs")) config.epochs = d["epochs"].cast<int>();
    if (d.contains("sampling_temperature")) {
        config.sampling_temperature = d["sampling_temperature"].cast<double>();
    }
    return config;
}

py::list log_to_py(const gb::grpo::TrainingLog& log) {
    py::list rows;
    for (const gb::grpo::TrainLogRow& row : log.rows) {
        py::dict d;
        d["step"] = row.step;
        d["mean_reward"] = row.mean_reward;
        d["objective"] = row.objective;
        d["kl"] = row.kl;
        d["accuracy"] = row.accuracy;
        rows.append(d);
    }
    return rows;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Forum-to-benchmark pipeline, rule-based rewards, GRPO core, expert router, "
              "and MCQ evaluation harness.";

    py::register_exception<gb::Error>(m, "GenomebenchError");

    // ---- reward ----
    m.def("extract_answer", [](const std::string& response) -> py::object {
        const auto label = gb::reward::extract_answer(response);
        if (!label) return py::none();
        return py::str(std::string(1, *label));
    });
    m.def("score_response", [](const std::string& response, const std::string& gold) {
        if (gold.size() != 1) throw py::value_error("gold must be a single letter a-e");
        const gb::reward::RewardBreakdown b = gb::reward::score_response(response, gold[0]);
        py::dict d;
        d["format_reward"] = b.format_reward;
        d["correctness_reward"] = b.correctness_reward;
        d["total"] = b.total;
        d["extracted_label"] =
            b.extracted_label ? py::object(py::str(std::string(1, *b.extracted_label))) : py::none();
        d["invalid"] = b.invalid;
        return d;
    });

    // ---- mcq ----
    m.def("encode_answer", [](const std::string& explanation, const std::string& label) {
        if (label.size() != 1) throw py::value_error("label must be a single letter a-e");
        return gb::mcq::encode_answer(explanation, label[0]);
    });
    m.def("decode_answer", [](const std::string& encoded) {
        const auto [explanation, label] = gb::mcq::decode_answer(encoded);
        return py::make_tuple(explanation, std::string(1, label));
    });
    m.def("assemble_mcq", [](const std::string& question, const std::vector<std::string>& options,
                             int correct_index, const std::string& explanation, std::uint64_t seed) {
        if (options.size() != 5) throw py::value_error("exactly 5 options required");
        gb::mcq::OptionSet set;
        std::copy(options.begin(), options.end(), set.options.begin());
        set.correct_index = correct_index;
        return json_to_py(gb::mcq::item_to_json(gb::mcq::assemble_mcq(question, set, explanation, seed)));
    });

    // ---- curation ----
    py::class_<gb::curation::KeywordTable>(m, "KeywordTable")
        .def_static("load", &gb::curation::KeywordTable::load)
        .def_static("from_json",
                    [](const py::dict& d) { return gb::curation::KeywordTable::from_json(py_to_json(d)); })
        .def("to_dict", [](const gb::curation::KeywordTable& t) { return json_to_py(t.to_json()); });

    m.def("assign_category", [](const std::string& question, const gb::curation::KeywordTable& table) {
        const auto assignment = gb::curation::assign_category(question, table);
        return py::make_tuple(std::string(gb::category_name(assignment.category)), assignment.fallback);
    });
    m.def("assign_difficulty", [](const std::string& question, const gb::curation::KeywordTable& table) {
        return std::string(gb::difficulty_name(gb::curation::assign_difficulty(question, table)));
    });
    m.def("difficulty_score", &gb::curation::difficulty_score);
    m.def("near_dedup", [](const py::list& items, double threshold) {
        const auto result = gb::curation::near_dedup(items_from_py(items), threshold);
        return py::make_tuple(items_to_py(result.kept), result.duplicate_groups);
    }, py::arg("items"), py::arg("threshold") = 0.9);
    m.def("split_dataset", [](const py::list& items, double test_fraction, std::uint64_t seed) {
        const auto result = gb::curation::split_dataset(items_from_py(items), test_fraction, seed);
        return py::make_tuple(items_to_py(result.train), items_to_py(result.test));
    });

    // ---- grpo ----
    py::class_<gb::grpo::CategoricalPolicy>(m, "CategoricalPolicy")
        .def(py::init<int, int>(), py::arg("feature_dim"), py::arg("action_count"))
        .def_property_readonly("feature_dim", &gb::grpo::CategoricalPolicy::feature_dim)
        .def_property_readonly("action_count", &gb::grpo::CategoricalPolicy::action_count)
        .def("get_weights", [](const gb::grpo::CategoricalPolicy& p) { return p.weights.data; })
        .def("set_weights",
             [](gb::grpo::CategoricalPolicy& p, const std::vector<double>& weights) {
                 if (weights.size() != p.weights.data.size()) {
                     throw py::value_error("weight count mismatch");
                 }
                 p.weights.data = weights;
             })
        .def("logits", [](const gb::grpo::CategoricalPolicy& p, const gb::grpo::FeatureVec& x) {
            return p.logits(x);
        })
        .def("action_dist", [](const gb::grpo::CategoricalPolicy& p, const gb::grpo::FeatureVec& x) {
            return p.action_dist(x);
        })
        .def("greedy_action", [](const gb::grpo::CategoricalPolicy& p, const gb::grpo::FeatureVec& x) {
            return p.greedy_action(x);
        });

    m.def("group_advantages", [](const std::vector<double>& rewards, double std_floor) {
        return gb::grpo::group_advantages(rewards, std_floor);
    }, py::arg("rewards"), py::arg("std_floor") = 1e-8);
    m.def("clipped_term", &gb::grpo::clipped_term);
    m.def("kl_exact", [](const std::vector<double>& p, const std::vector<double>& q) {
        return gb::grpo::kl_exact(p, q);
    });
    m.def("softmax", &gb::grpo::softmax);
    m.def("sft_loss", [](const gb::grpo::CategoricalPolicy& policy,
                         const std::vector<std::pair<gb::grpo::FeatureVec, int>>& examples) {
        std::vector<gb::grpo::SftExample> converted;
        converted.reserve(examples.size());
        for (const auto& [features, gold] : examples) converted.push_back({features, gold});
        const auto result = gb::grpo::sft_loss(policy, converted);
        return py::make_tuple(result.value, result.gradient.data);
    });
    m.def("train_grpo", [](gb::grpo::CategoricalPolicy& policy,
                           const std::vector<std::pair<gb::grpo::FeatureVec, int>>& items,
                           const py::dict& config, std::uint64_t seed) {
        std::vector<gb::grpo::TrainItem> converted;
        converted.reserve(items.size());
        for (const auto& [features, gold] : items) converted.push_back({features, gold});
        gb::grpo::TrainOptions options;
        options.seed = seed;
        if (config.contains("weight_decay")) {
            options.optimizer.weight_decay = config["weight_decay"].cast<double>();
        }
        const auto log = gb::grpo::train_grpo(policy, converted, config_from_py(config),
                                              std::move(options));
        return log_to_py(log);
    }, py::arg("policy"), py::arg("items"), py::arg("config") = py::dict(), py::arg("seed") = 0);

    // ---- router ----
    py::class_<gb::router::ExpertResponses>(m, "ExpertResponses")
        .def_static("load", &gb::router::read_expert_responses)
        .def_property_readonly("expert_count",
                               [](const gb::router::ExpertResponses& r) { return r.expert_count; })
        .def_property_readonly("question_ids",
                               [](const gb::router::ExpertResponses& r) { return r.question_ids; })
        .def("correctness", &gb::router::ExpertResponses::correctness);

    m.def("featurize", &gb::router::featurize, py::arg("question"), py::arg("dim") = 1 << 14);
    m.def("complementarity", &gb::router::complementarity);
    m.def("union_accuracy", &gb::router::union_accuracy);
    m.def("train_router", [](const gb::router::ExpertResponses& responses,
                             const std::vector<std::string>& questions, const py::dict& config,
                             std::uint64_t seed, int feature_dim) {
        gb::grpo::GrpoConfig grpoConfig = config_from_py(config);
        if (!config.contains("group_size")) grpoConfig.group_size = 8;
        auto result = gb::router::train_router(responses, questions, grpoConfig, seed, feature_dim);
        return py::make_tuple(std::move(result.policy), log_to_py(result.log));
    }, py::arg("responses"), py::arg("questions"), py::arg("config") = py::dict(),
       py::arg("seed") = 0, py::arg("feature_dim") = 1 << 14);
    m.def("route_and_report", [](const gb::grpo::CategoricalPolicy& policy,
                                 const gb::router::ExpertResponses& responses,
                                 const std::vector<std::string>& questions, int feature_dim) {
        return json_to_py(
            gb::router::route_and_report(policy, responses, questions, feature_dim).to_json());
    }, py::arg("policy"), py::arg("responses"), py::arg("questions"),
       py::arg("feature_dim") = 1 << 14);

    // ---- llm bridge (mock only; remote runs through the CLI) ----
    py::class_<gb::bridge::MockBackend>(m, "MockBackend")
        .def(py::init([](const py::object& rules, bool echo, const std::string& default_response) {
                 std::vector<gb::bridge::MockRule> parsed;
                 if (!rules.is_none()) {
                     for (const auto& rule : rules.cast<py::list>()) {
                         const py::dict d = rule.cast<py::dict>();
                         gb::bridge::MockRule r;
                         r.match = d.contains("match") ? d["match"].cast<std::string>() : "";
                         if (d.contains("responses")) {
                             r.responses = d["responses"].cast<std::vector<std::string>>();
                         } else if (d.contains("response")) {
                             r.responses.push_back(d["response"].cast<std::string>());
                         }
                         parsed.push_back(std::move(r));
                     }
                 }
                 return gb::bridge::MockBackend(std::move(parsed), echo, default_response);
             }),
             py::arg("rules") = py::none(), py::arg("echo") = false,
             py::arg("default_response") = std::string())
        .def("complete", [](gb::bridge::MockBackend& backend, const std::string& system,
                            const std::string& user, std::uint64_t seed) {
            gb::bridge::CompletionRequest request;
            request.system_prompt = system;
            request.user_prompt = user;
            request.seed = seed;
            return backend.complete(request);
        }, py::arg("system"), py::arg("user"), py::arg("seed") = 0);

    // ---- eval harness ----
    m.def("build_prompt", [](const py::dict& item) {
        const auto prompt = gb::eval::build_prompt(item_from_py(item));
        return py::make_tuple(prompt.system, prompt.user);
    });
    m.def("run_eval", [](const py::list& items, gb::bridge::MockBackend& backend, int runs,
                         std::uint64_t seed) {
        gb::eval::RunOptions options;
        options.runs = runs;
        options.seed = seed;
        const auto records = gb::eval::run_eval(items_from_py(items), backend, options);
        py::list out;
        for (const auto& record : records) out.append(json_to_py(gb::eval::record_to_json(record)));
        return out;
    }, py::arg("items"), py::arg("backend"), py::arg("runs") = 1, py::arg("seed") = 0);
    m.def("pass_at_k", [](const py::list& records, const std::vector<int>& ks) {
        std::vector<gb::eval::EvalRecord> converted;
        for (const auto& record : records) {
            converted.push_back(gb::eval::record_from_json(py_to_json(record)));
        }
        return gb::eval::pass_at_k(converted, ks);
    });
    m.def("make_report", [](const py::list& records, const py::list& items,
                            const std::vector<int>& ks) {
        std::vector<gb::eval::EvalRecord> converted;
        for (const auto& record : records) {
            converted.push_back(gb::eval::record_from_json(py_to_json(record)));
        }
        return json_to_py(gb::eval::make_report(converted, items_from_py(items), ks).to_json());
    }, py::arg("records"), py::arg("items"), py::arg("ks") = std::vector<int>{});

    // ---- ingest ----
    m.def("parse_mbox", [](const std::filesystem::path& path) {
        const auto result = gb::ingest::parse_mbox_file(path);
        py::list threads;
        for (const auto& thread : result.threads) {
            threads.append(json_to_py(gb::ingest::thread_to_json(thread)));
        }
        py::dict report;
        report["messages_read"] = result.report.messages_read;
        report["messages_dropped"] = result.report.messages_dropped;
        report["threads_formed"] = result.report.threads_formed;
        report["undecodable_bytes"] = result.report.undecodable_bytes;
        return py::make_tuple(threads, report);
    });
    m.def("parse_mbox_bytes", [](const py::bytes& data) {
        std::istringstream in(data.cast<std::string>());
        const auto result = gb::ingest::parse_mbox(in);
        py::list threads;
        for (const auto& thread : result.threads) {
            threads.append(json_to_py(gb::ingest::thread_to_json(thread)));
        }
        py::dict report;
        report["messages_read"] = result.report.messages_read;
        report["messages_dropped"] = result.report.messages_dropped;
        report["threads_formed"] = result.report.threads_formed;
        report["undecodable_bytes"] = result.report.undecodable_bytes;
        return py::make_tuple(threads, report);
    });
    m.def("anonymize_thread", [](const py::dict& thread) {
        const auto [anonymized, map] =
            gb::ingest::anonymize_thread(gb::ingest::thread_from_json(py_to_json(thread)));
        return py::make_tuple(json_to_py(gb::ingest::thread_to_json(anonymized)),
                              map.alias_by_identity);
    });

#ifdef GENOMEBENCH_VERSION
    m.attr("__version__") = GENOMEBENCH_VERSION;
#else
    m.attr("__version__") = "dev";
#endif
}
