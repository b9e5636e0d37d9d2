// finrag: retrieval-augmented agentic QA over financial documents.
//
// Subcommands: ingest, index, ask, chat, eval, mine-negatives, train-router,
// calibrate, sweep. Exit codes: 0 success, 1 configuration/usage error,
// 2 runtime error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "finrag/agent.hpp"
#include "finrag/config.hpp"
#include "finrag/eval.hpp"
#include "finrag/version.hpp"

namespace fs = std::filesystem;
using namespace finrag;

namespace {

struct CommonOptions {
    std::string config_path;
    std::string backend;      // overrides config when set
    std::string router;       // off | heuristic | <model path>
    int top_k = -1;
    double alpha = -1.0;
    double theta = -1.0;
    std::string api_key;
    std::string lexicon_path;
    std::string calibration_path;
};

config::AppConfig resolve_config(const CommonOptions& opt) {
    config::AppConfig cfg = config::load_config(opt.config_path);
    if (!opt.backend.empty()) cfg.backend = opt.backend;
    if (opt.top_k > 0) cfg.agent.retrieval.top_k = opt.top_k;
    if (opt.alpha >= 0.0) cfg.agent.retrieval.alpha = opt.alpha;
    if (opt.theta >= 0.0) cfg.agent.confidence_threshold = opt.theta;
    if (!opt.api_key.empty()) cfg.api_key = opt.api_key;
    if (!opt.lexicon_path.empty()) cfg.lexicon_path = opt.lexicon_path;
    if (!opt.calibration_path.empty()) cfg.calibration_path = opt.calibration_path;
    if (!opt.router.empty()) {
        if (opt.router == "off" || opt.router == "heuristic") {
            cfg.agent.router_mode = opt.router;
        } else {
            cfg.agent.router_mode = "model";
            cfg.router_model_path = opt.router;
        }
    }
    cfg.validate();
    return cfg;
}

std::shared_ptr<embed::EmbeddingProvider> make_provider(const config::AppConfig& cfg) {
    if (cfg.provider_kind == "hash") {
        return embed::make_hash_provider(cfg.embed_dim);
    }
    embed::HttpProviderConfig pc;
    pc.endpoint = cfg.embed_endpoint;
    pc.model = cfg.embed_model;
    pc.api_key = cfg.api_key;
    pc.dim = cfg.embed_dim;
    return std::make_shared<embed::HttpEmbeddingProvider>(pc);
}

std::shared_ptr<llm::LlmBackend> make_backend(const config::AppConfig& cfg) {
    if (cfg.backend.rfind("scripted:", 0) == 0) {
        const std::string path = cfg.backend.substr(9);
        if (path.empty()) {
            throw config::ConfigError("scripted backend requires a rules file path");
        }
        return std::make_shared<llm::ScriptedBackend>(llm::ScriptedRules::load(path));
    }
    llm::HttpBackendConfig hc;
    hc.endpoint = cfg.llm_endpoint;
    hc.model = cfg.llm_model;
    hc.api_key = cfg.api_key;
    if (hc.endpoint.empty()) {
        throw config::ConfigError("http backend requires llm.endpoint (or FINRAG_LLM_ENDPOINT)");
    }
    return std::make_shared<llm::HttpBackend>(hc);
}

mining::Lexicon load_lexicon_for(const config::AppConfig& cfg) {
    const std::string path =
        cfg.lexicon_path.empty() ? mining::default_lexicon_path() : cfg.lexicon_path;
    return mining::load_lexicon(path);
}

agent::AgentBackends make_agent_backends(const config::AppConfig& cfg,
                                         std::shared_ptr<llm::UsageLedger> ledger) {
    agent::AgentBackends b;
    b.backend = make_backend(cfg);
    b.ledger = std::move(ledger);
    b.cost = cfg.cost;
    if (!cfg.calibration_path.empty()) {
        b.calibration = calibration::load_calibration(cfg.calibration_path);
    }
    if (cfg.agent.router_mode == "model") {
        b.router_model = router::load_router_model(cfg.router_model_path);
    }
    return b;
}

std::vector<corpus::Document> read_documents(const std::vector<std::string>& paths) {
    std::vector<corpus::Document> docs;
    for (const auto& path : paths) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open document file: " + path);
        if (fs::path(path).extension() == ".jsonl") {
            std::string line;
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                docs.push_back(corpus::parse_document(nlohmann::json::parse(line)));
            }
        } else {
            nlohmann::json j;
            in >> j;
            if (j.is_object() && j.contains("documents")) {
                for (const auto& jd : j["documents"]) docs.push_back(corpus::parse_document(jd));
            } else if (j.is_array()) {
                for (const auto& jd : j) docs.push_back(corpus::parse_document(jd));
            } else {
                docs.push_back(corpus::parse_document(j));
            }
        }
    }
    return docs;
}

index::Index load_or_build_index(const std::string& index_path, const config::AppConfig& cfg,
                                 const eval::LoadedDataset* dataset = nullptr) {
    if (!index_path.empty()) {
        // Reattach a provider matching what the index was built with; the
        // stored provider id carries the kind and dimension.
        std::ifstream in(index_path);
        if (!in) throw std::runtime_error("cannot open index file: " + index_path);
        std::stringstream ss;
        ss << in.rdbuf();
        const auto j = nlohmann::json::parse(ss.str(), nullptr, false);
        if (j.is_discarded()) throw std::runtime_error("index file is not valid JSON");
        const std::string provider_id = j.value("provider_id", "");
        const int dim = j.value("dim", cfg.embed_dim);
        std::shared_ptr<embed::EmbeddingProvider> provider;
        if (provider_id.rfind("hash-", 0) == 0) {
            provider = embed::make_hash_provider(dim);
        } else {
            config::AppConfig http_cfg = cfg;
            http_cfg.provider_kind = "http";
            http_cfg.embed_dim = dim;
            provider = make_provider(http_cfg);
        }
        return index::deserialize_index(ss.str(), std::move(provider));
    }
    if (!dataset || dataset->documents.empty()) {
        throw config::ConfigError("no --index given and the dataset carries no documents");
    }
    auto passages = corpus::build_corpus(dataset->documents, cfg.chunking);
    return index::build_index(passages, make_provider(cfg));
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << content;
}

// ---------------------------------------------------------------------------

int cmd_ingest(const std::vector<std::string>& doc_paths, const std::string& out_path,
               const config::AppConfig& cfg) {
    auto docs = read_documents(doc_paths);
    auto passages = corpus::build_corpus(docs, cfg.chunking);
    corpus::write_passages_jsonl(passages, out_path);
    std::cout << "ingested " << docs.size() << " document(s) -> " << passages.size()
              << " passage(s) at " << out_path << "\n";
    return 0;
}

int cmd_index(const std::string& corpus_path, const std::string& out_path,
              const config::AppConfig& cfg) {
    auto passages = corpus::read_passages_jsonl(corpus_path);
    auto idx = index::build_index(passages, make_provider(cfg), cfg.agent.retrieval);
    index::save_index(idx, out_path);
    std::cout << "indexed " << idx.n_passages << " passage(s) at " << out_path << "\n";
    return 0;
}

int cmd_ask(const std::string& index_path, const std::string& question,
            const std::string& trace_path, bool show_trace, const config::AppConfig& cfg) {
    auto idx = load_or_build_index(index_path, cfg);
    auto ledger = std::make_shared<llm::UsageLedger>();
    agent::Agent agent(idx, cfg.agent, make_agent_backends(cfg, ledger), load_lexicon_for(cfg));
    auto result = agent.run_question(question, "cli");
    std::cout << answer::format_answer(result.answer) << "\n";
    const auto trace_json = agent::trace_to_json(result.trace);
    if (show_trace) std::cout << trace_json.dump(2) << "\n";
    if (!trace_path.empty()) write_text_file(trace_path, trace_json.dump() + "\n");
    return 0;
}

int cmd_chat(const std::string& index_path, const config::AppConfig& cfg) {
    auto idx = load_or_build_index(index_path, cfg);
    auto ledger = std::make_shared<llm::UsageLedger>();
    agent::Agent agent(idx, cfg.agent, make_agent_backends(cfg, ledger), load_lexicon_for(cfg));
    agent::ConversationSession session(agent, "chat");
    std::optional<nlohmann::json> last_trace;

    std::cout << "finrag chat (commands: /reset /trace /history /quit)\n";
    std::string line;
    while (std::cout << "> " << std::flush, std::getline(std::cin, line)) {
        if (line.empty()) continue;
        if (line == "/quit" || line == "/exit") break;
        if (line == "/reset") {
            session.reset();
            last_trace.reset();
            std::cout << "conversation reset\n";
            continue;
        }
        if (line == "/history") {
            std::cout << (session.history().empty() ? "(empty)\n" : session.history());
            continue;
        }
        if (line == "/trace") {
            std::cout << (last_trace ? last_trace->dump(2) : "(no trace yet)") << "\n";
            continue;
        }
        try {
            auto result = session.ask(line);
            last_trace = agent::trace_to_json(result.trace);
            std::cout << answer::format_answer(result.answer) << "\n";
        } catch (const std::exception& e) {
            std::cout << "error: " << e.what() << "\n";
        }
    }
    return 0;
}

struct EvalArtifacts {
    eval::EvalOutput output;
    double avg_iterations = 0.0;
};

EvalArtifacts run_eval_once(const eval::LoadedDataset& dataset, const index::Index& idx,
                            const config::AppConfig& cfg, int workers, const std::string& label,
                            std::shared_ptr<llm::UsageLedger> ledger) {
    eval::EvalRunConfig run_cfg;
    run_cfg.agent = cfg.agent;
    run_cfg.workers = workers;
    run_cfg.label = label;

    std::optional<calibration::CalibrationModel> calib;
    if (!cfg.calibration_path.empty()) {
        calib = calibration::load_calibration(cfg.calibration_path);
    }
    std::optional<router::RouterModel> router_model;
    if (cfg.agent.router_mode == "model") {
        router_model = router::load_router_model(cfg.router_model_path);
    }

    eval::BackendFactory factory;
    if (cfg.backend.rfind("scripted:", 0) == 0) {
        auto rules = llm::ScriptedRules::load(cfg.backend.substr(9));
        factory = [rules] { return std::make_shared<llm::ScriptedBackend>(rules); };
    } else {
        auto shared = make_backend(cfg);
        factory = [shared] { return shared; };
    }

    EvalArtifacts art;
    art.output = eval::run_evaluation(dataset, idx, run_cfg, factory, load_lexicon_for(cfg),
                                      std::move(ledger), cfg.cost, calib, router_model);
    long iterations = 0;
    for (const auto& line : art.output.trace_lines) {
        iterations += nlohmann::json::parse(line)["iterations"].size();
    }
    art.avg_iterations = dataset.examples.empty()
                             ? 0.0
                             : static_cast<double>(iterations) /
                                   static_cast<double>(dataset.examples.size());
    return art;
}

int cmd_eval(const std::string& dataset_path, const std::string& format,
             const std::string& index_path, const std::string& report_path,
             const std::string& traces_path, int workers, const std::string& label,
             const config::AppConfig& cfg) {
    auto dataset = eval::load_dataset(dataset_path, eval::dataset_format_from_string(format));
    auto idx = load_or_build_index(index_path, cfg, &dataset);
    auto ledger = std::make_shared<llm::UsageLedger>();
    auto art = run_eval_once(dataset, idx, cfg, workers, label, ledger);

    std::cout << eval::metric_report_table(art.output.report);
    if (dataset.skipped > 0) {
        std::cout << "skipped records       " << dataset.skipped << "\n";
    }
    const bool tatqa = format == "tatqa";
    if (tatqa) {
        std::cout << "note: TAT-QA scoring here is the exe_acc + token-F1 approximation of the"
                     " official answer-type-specific metric\n";
    }
    if (!report_path.empty()) {
        nlohmann::json j = eval::metric_report_to_json(art.output.report);
        j["label"] = label;
        j["avg_iterations"] = art.avg_iterations;
        if (tatqa) {
            j["scoring_note"] =
                "exe_acc + token-F1 approximation of the official TAT-QA type-specific scoring";
        }
        write_text_file(report_path, j.dump(2) + "\n");
    }
    if (!traces_path.empty()) {
        std::string blob;
        for (const auto& line : art.output.trace_lines) blob += line + "\n";
        write_text_file(traces_path, blob);
    }
    return 0;
}

int cmd_mine(const std::string& corpus_path, const std::string& queries_path,
             const std::string& out_path, const std::string& report_path,
             const std::string& companies_path, const config::AppConfig& cfg) {
    auto passages = corpus::read_passages_jsonl(corpus_path);
    std::vector<mining::MiningQuery> queries;
    {
        std::ifstream in(queries_path);
        if (!in) throw std::runtime_error("cannot open queries file: " + queries_path);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto j = nlohmann::json::parse(line);
            queries.push_back({j.at("query_id").get<std::string>(),
                               j.at("gold_passage_id").get<std::string>()});
        }
    }
    std::map<std::string, std::string> companies;
    if (!companies_path.empty()) {
        std::ifstream in(companies_path);
        if (!in) throw std::runtime_error("cannot open companies file: " + companies_path);
        nlohmann::json j;
        in >> j;
        for (auto it = j.begin(); it != j.end(); ++it) companies[it.key()] = it.value();
    }
    auto report = mining::mine_negatives(passages, queries, load_lexicon_for(cfg), companies);
    mining::write_pairs_jsonl(report, out_path);
    const auto summary = mining::mining_report_to_json(report);
    std::cout << summary.dump(2) << "\n";
    if (!report_path.empty()) write_text_file(report_path, summary.dump(2) + "\n");
    return 0;
}

int cmd_train_router(const std::string& data_path, const std::string& out_path, unsigned seed) {
    std::ifstream in(data_path);
    if (!in) throw std::runtime_error("cannot open training data: " + data_path);
    std::vector<router::RouterFeatures> features;
    std::vector<bool> labels;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        router::RouterFeatures f;
        const auto& vals = j.at("features");
        if (vals.size() != router::RouterFeatures::kDim) {
            throw std::runtime_error("feature vector must have 12 dimensions");
        }
        for (size_t i = 0; i < f.values.size(); ++i) f.values[i] = vals[i].get<double>();
        features.push_back(f);
        labels.push_back(j.at("label").get<int>() != 0);
    }
    auto report = router::train_router(features, labels, seed);
    router::save_router_model(report.model, out_path);
    std::cout << "trained on " << features.size() << " example(s); 5-fold CV accuracy "
              << report.cv_accuracy << "\n";
    return 0;
}

int cmd_calibrate(const std::string& pairs_path, const std::string& out_path) {
    std::ifstream in(pairs_path);
    if (!in) throw std::runtime_error("cannot open pairs file: " + pairs_path);
    std::vector<std::pair<double, bool>> pairs;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        pairs.emplace_back(j.at("raw").get<double>(), j.at("correct").get<bool>());
    }
    auto model = calibration::fit_calibration(pairs);
    calibration::save_calibration(model, out_path);
    std::cout << "fitted " << model.steps.size() << " step(s) from " << pairs.size()
              << " pair(s)\n";
    return 0;
}

std::vector<double> parse_sweep_values(const std::string& spec) {
    try {
        std::vector<double> values;
        const auto dots = spec.find("..");
        if (dots != std::string::npos) {
            const auto colon = spec.find(':', dots);
            if (colon == std::string::npos) {
                throw config::ConfigError("range sweep must be start..end:step");
            }
            const double start = std::stod(spec.substr(0, dots));
            const double end = std::stod(spec.substr(dots + 2, colon - dots - 2));
            const double step = std::stod(spec.substr(colon + 1));
            if (step <= 0) throw config::ConfigError("sweep step must be positive");
            for (double v = start; v <= end + 1e-9; v += step) values.push_back(v);
            return values;
        }
        std::stringstream ss(spec);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (!item.empty()) values.push_back(std::stod(item));
        }
        if (values.empty()) throw config::ConfigError("empty sweep specification");
        return values;
    } catch (const config::ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw config::ConfigError("malformed sweep values: " + spec);
    }
}

int cmd_sweep(const std::string& dataset_path, const std::string& format,
              const std::string& index_path, const std::string& theta_spec,
              const std::string& topk_spec, const std::string& iters_spec,
              const std::string& out_path, const config::AppConfig& base_cfg) {
    const int axes = (!theta_spec.empty() ? 1 : 0) + (!topk_spec.empty() ? 1 : 0) +
                     (!iters_spec.empty() ? 1 : 0);
    if (axes != 1) {
        throw config::ConfigError(
            "sweep requires exactly one of --theta, --top-k or --max-iterations");
    }
    auto dataset = eval::load_dataset(dataset_path, eval::dataset_format_from_string(format));
    auto idx = load_or_build_index(index_path, base_cfg, &dataset);

    const std::string axis = !theta_spec.empty() ? "theta"
                             : !topk_spec.empty() ? "top_k"
                                                  : "max_iterations";
    const auto values = parse_sweep_values(!theta_spec.empty()   ? theta_spec
                                           : !topk_spec.empty()  ? topk_spec
                                                                 : iters_spec);

    nlohmann::json rows = nlohmann::json::array();
    std::cout << axis << "    exe_acc   avg_iters  api_calls\n";
    for (double v : values) {
        config::AppConfig cfg = base_cfg;
        if (axis == "theta") {
            cfg.agent.confidence_threshold = v;
        } else if (axis == "top_k") {
            cfg.agent.retrieval.top_k = static_cast<int>(v);
        } else {
            cfg.agent.max_iterations = static_cast<int>(v);
        }
        auto ledger = std::make_shared<llm::UsageLedger>();
        auto art = run_eval_once(dataset, idx, cfg, 1, "sweep", ledger);
        nlohmann::json row{{axis, v},
                           {"exe_acc", art.output.report.exe_acc},
                           {"avg_iterations", art.avg_iterations},
                           {"avg_api_calls", art.output.report.avg_api_calls}};
        rows.push_back(row);
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%-8.2f %-9.4f %-10.2f %-9.2f\n", v,
                      art.output.report.exe_acc, art.avg_iterations,
                      art.output.report.avg_api_calls);
        std::cout << buf;
    }
    if (!out_path.empty()) write_text_file(out_path, rows.dump(2) + "\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"finrag: agentic retrieval-augmented QA for financial documents"};
    app.set_version_flag("--version", std::string(version::kVersion));
    app.require_subcommand(1);

    CommonOptions common;
    app.add_option("--config", common.config_path, "JSON config file");

    auto add_common_overrides = [&common](CLI::App* sub) {
        sub->fallthrough();  // lets the top-level --config follow the subcommand
        sub->add_option("--backend", common.backend, "scripted:<rules.json> or http");
        sub->add_option("--router", common.router, "off | heuristic | <model path>");
        sub->add_option("--k", common.top_k, "retrieval top-k override");
        sub->add_option("--alpha", common.alpha, "hybrid lexical weight override");
        sub->add_option("--theta", common.theta, "confidence threshold override");
        sub->add_option("--api-key", common.api_key, "API key (flag > env > config)");
        sub->add_option("--lexicon", common.lexicon_path, "financial lexicon file");
        sub->add_option("--calibration", common.calibration_path, "calibration model file");
    };

    // ingest
    auto* ingest = app.add_subcommand("ingest", "parse documents into a passage corpus");
    ingest->fallthrough();
    std::vector<std::string> ingest_docs;
    std::string ingest_out = "corpus.jsonl";
    ingest->add_option("--docs", ingest_docs, "document file(s): .json or .jsonl")->required();
    ingest->add_option("--out", ingest_out, "output passage JSONL");
    int chunk_size = -1, overlap = -1;
    ingest->add_option("--chunk-size", chunk_size, "chunk size in tokens");
    ingest->add_option("--overlap", overlap, "chunk overlap in tokens");

    // index
    auto* index_cmd = app.add_subcommand("index", "embed a corpus and build the hybrid index");
    index_cmd->fallthrough();
    std::string index_corpus, index_out = "index.json";
    index_cmd->add_option("--corpus", index_corpus, "passage JSONL from ingest")->required();
    index_cmd->add_option("--out", index_out, "output index file");
    std::string provider_kind;
    int provider_dim = -1;
    index_cmd->add_option("--provider", provider_kind, "hash | http");
    index_cmd->add_option("--dim", provider_dim, "embedding dimension");

    // ask
    auto* ask = app.add_subcommand("ask", "answer one question");
    std::string ask_index, ask_question, ask_trace;
    bool ask_show_trace = false;
    ask->add_option("--index", ask_index, "index file")->required();
    ask->add_option("--question", ask_question, "the question")->required();
    ask->add_option("--trace", ask_trace, "write the trace record here");
    ask->add_flag("--show-trace", ask_show_trace, "print the trace to stdout");
    add_common_overrides(ask);

    // chat
    auto* chat = app.add_subcommand("chat", "interactive multi-turn REPL");
    std::string chat_index;
    chat->add_option("--index", chat_index, "index file")->required();
    add_common_overrides(chat);

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "run a dataset and report all metrics");
    std::string eval_dataset, eval_format = "native", eval_index, eval_report, eval_traces,
                eval_label = "default";
    int eval_workers = 1;
    eval_cmd->add_option("--dataset", eval_dataset, "dataset file")->required();
    eval_cmd->add_option("--format", eval_format, "native | finqa | convfinqa | tatqa");
    eval_cmd->add_option("--index", eval_index, "index file (default: build from dataset docs)");
    eval_cmd->add_option("--out", eval_report, "metric report JSON path");
    eval_cmd->add_option("--traces", eval_traces, "trace JSONL path");
    eval_cmd->add_option("--workers", eval_workers, "parallel sessions");
    eval_cmd->add_option("--label", eval_label, "configuration label for cost reports");
    add_common_overrides(eval_cmd);

    // mine-negatives
    auto* mine = app.add_subcommand("mine-negatives", "mine hard negative pairs from a corpus");
    mine->fallthrough();
    std::string mine_corpus, mine_queries, mine_out = "pairs.jsonl", mine_report, mine_companies;
    mine->add_option("--corpus", mine_corpus, "passage JSONL")->required();
    mine->add_option("--queries", mine_queries, "JSONL of {query_id, gold_passage_id}")
        ->required();
    mine->add_option("--out", mine_out, "mined pairs JSONL");
    mine->add_option("--report", mine_report, "distribution report JSON");
    mine->add_option("--companies", mine_companies, "JSON map doc_id -> company");
    mine->add_option("--lexicon", common.lexicon_path, "financial lexicon file");

    // train-router
    auto* train = app.add_subcommand("train-router", "train the complexity router");
    train->fallthrough();
    std::string train_data, train_out = "router.json";
    unsigned train_seed = 42;
    train->add_option("--data", train_data, "JSONL of {features:[12], label:0|1}")->required();
    train->add_option("--out", train_out, "model output path");
    train->add_option("--seed", train_seed, "training seed");

    // calibrate
    auto* calib = app.add_subcommand("calibrate", "fit isotonic confidence calibration");
    calib->fallthrough();
    std::string calib_pairs, calib_out = "calibration.json";
    calib->add_option("--pairs", calib_pairs, "JSONL of {raw, correct}")->required();
    calib->add_option("--out", calib_out, "model output path");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "sensitivity sweep over theta or top-k");
    sweep->fallthrough();
    std::string sweep_dataset, sweep_format = "native", sweep_index, sweep_theta, sweep_topk,
                sweep_iters, sweep_out;
    sweep->add_option("--dataset", sweep_dataset, "dataset file")->required();
    sweep->add_option("--format", sweep_format, "dataset format");
    sweep->add_option("--index", sweep_index, "index file");
    sweep->add_option("--theta", sweep_theta, "range start..end:step or comma list");
    sweep->add_option("--top-k", sweep_topk, "comma list of k values");
    sweep->add_option("--max-iterations", sweep_iters, "comma list of K values");
    sweep->add_option("--out", sweep_out, "sweep table JSON");
    sweep->add_option("--backend", common.backend, "scripted:<rules.json> or http");
    sweep->add_option("--router", common.router, "off | heuristic | <model path>");
    sweep->add_option("--alpha", common.alpha, "hybrid lexical weight override");
    sweep->add_option("--api-key", common.api_key, "API key (flag > env > config)");
    sweep->add_option("--lexicon", common.lexicon_path, "financial lexicon file");
    sweep->add_option("--calibration", common.calibration_path, "calibration model file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;  // usage problems exit 1
    }

    try {
        config::AppConfig cfg = resolve_config(common);
        if (ingest->parsed()) {
            if (chunk_size > 0) cfg.chunking.chunk_size_tokens = chunk_size;
            if (overlap >= 0) cfg.chunking.overlap_tokens = overlap;
            cfg.validate();
            return cmd_ingest(ingest_docs, ingest_out, cfg);
        }
        if (index_cmd->parsed()) {
            if (!provider_kind.empty()) cfg.provider_kind = provider_kind;
            if (provider_dim > 0) cfg.embed_dim = provider_dim;
            cfg.validate();
            return cmd_index(index_corpus, index_out, cfg);
        }
        if (ask->parsed()) return cmd_ask(ask_index, ask_question, ask_trace, ask_show_trace, cfg);
        if (chat->parsed()) return cmd_chat(chat_index, cfg);
        if (eval_cmd->parsed()) {
            return cmd_eval(eval_dataset, eval_format, eval_index, eval_report, eval_traces,
                            eval_workers, eval_label, cfg);
        }
        if (mine->parsed()) {
            return cmd_mine(mine_corpus, mine_queries, mine_out, mine_report, mine_companies,
                            cfg);
        }
        if (train->parsed()) return cmd_train_router(train_data, train_out, train_seed);
        if (calib->parsed()) return cmd_calibrate(calib_pairs, calib_out);
        if (sweep->parsed()) {
            return cmd_sweep(sweep_dataset, sweep_format, sweep_index, sweep_theta, sweep_topk,
                             sweep_iters, sweep_out, cfg);
        }
        std::cerr << "no subcommand given\n";
        return 1;
    } catch (const config::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const CLI::Error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
