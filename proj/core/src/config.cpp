#include "finrag/config.hpp"

#include <cstdlib>
#include <fstream>

namespace finrag::config {

void AppConfig::validate() const {
    try {
        agent.validate();
        chunking.validate();
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    if (tau <= 0.0) throw ConfigError("tau must be positive");
    if (embed_dim <= 0) throw ConfigError("embed dim must be positive");
    if (provider_kind != "hash" && provider_kind != "http") {
        throw ConfigError("provider kind must be hash or http");
    }
    if (backend != "http" && backend.rfind("scripted:", 0) != 0) {
        throw ConfigError("backend must be http or scripted:<path>");
    }
    if (cost.input_per_1k < 0 || cost.output_per_1k < 0) {
        throw ConfigError("cost rates must be non-negative");
    }
}

AppConfig config_from_json(const nlohmann::json& j) {
    AppConfig cfg;
    cfg.agent.max_iterations = j.value("max_iterations", cfg.agent.max_iterations);
    cfg.agent.confidence_threshold =
        j.value("confidence_threshold", cfg.agent.confidence_threshold);
    cfg.agent.beta = j.value("beta", cfg.agent.beta);
    cfg.agent.buffer_capacity = j.value("buffer_capacity", cfg.agent.buffer_capacity);
    cfg.agent.turn_prune_size = j.value("turn_prune_size", cfg.agent.turn_prune_size);
    cfg.agent.retrieval.top_k = j.value("top_k", cfg.agent.retrieval.top_k);
    cfg.agent.retrieval.alpha = j.value("alpha", cfg.agent.retrieval.alpha);
    cfg.agent.retrieval.bm25_k1 = j.value("bm25_k1", cfg.agent.retrieval.bm25_k1);
    cfg.agent.retrieval.bm25_b = j.value("bm25_b", cfg.agent.retrieval.bm25_b);
    cfg.agent.router_mode = j.value("router", cfg.agent.router_mode);
    cfg.chunking.chunk_size_tokens = j.value("chunk_size_tokens", cfg.chunking.chunk_size_tokens);
    cfg.chunking.overlap_tokens = j.value("overlap_tokens", cfg.chunking.overlap_tokens);
    cfg.tau = j.value("tau", cfg.tau);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.backend = j.value("backend", cfg.backend);
    cfg.lexicon_path = j.value("lexicon", cfg.lexicon_path);
    cfg.router_model_path = j.value("router_model", cfg.router_model_path);
    cfg.calibration_path = j.value("calibration", cfg.calibration_path);
    if (j.contains("provider") && j["provider"].is_object()) {
        const auto& p = j["provider"];
        cfg.provider_kind = p.value("kind", cfg.provider_kind);
        cfg.embed_dim = p.value("dim", cfg.provider_kind == "http" ? 768 : cfg.embed_dim);
        cfg.embed_endpoint = p.value("endpoint", cfg.embed_endpoint);
        cfg.embed_model = p.value("model", cfg.embed_model);
    }
    if (j.contains("llm") && j["llm"].is_object()) {
        const auto& l = j["llm"];
        cfg.llm_endpoint = l.value("endpoint", cfg.llm_endpoint);
        cfg.llm_model = l.value("model", cfg.llm_model);
        cfg.api_key = l.value("api_key", cfg.api_key);
    }
    if (j.contains("cost") && j["cost"].is_object()) {
        cfg.cost.input_per_1k = j["cost"].value("input_per_1k", cfg.cost.input_per_1k);
        cfg.cost.output_per_1k = j["cost"].value("output_per_1k", cfg.cost.output_per_1k);
    }
    return cfg;
}

nlohmann::json config_to_json(const AppConfig& cfg) {
    return nlohmann::json{
        {"max_iterations", cfg.agent.max_iterations},
        {"confidence_threshold", cfg.agent.confidence_threshold},
        {"beta", cfg.agent.beta},
        {"buffer_capacity", cfg.agent.buffer_capacity},
        {"turn_prune_size", cfg.agent.turn_prune_size},
        {"top_k", cfg.agent.retrieval.top_k},
        {"alpha", cfg.agent.retrieval.alpha},
        {"bm25_k1", cfg.agent.retrieval.bm25_k1},
        {"bm25_b", cfg.agent.retrieval.bm25_b},
        {"router", cfg.agent.router_mode},
        {"chunk_size_tokens", cfg.chunking.chunk_size_tokens},
        {"overlap_tokens", cfg.chunking.overlap_tokens},
        {"tau", cfg.tau},
        {"seed", cfg.seed},
        {"backend", cfg.backend},
        {"lexicon", cfg.lexicon_path},
        {"router_model", cfg.router_model_path},
        {"calibration", cfg.calibration_path},
        {"provider", nlohmann::json{{"kind", cfg.provider_kind},
                                    {"dim", cfg.embed_dim},
                                    {"endpoint", cfg.embed_endpoint},
                                    {"model", cfg.embed_model}}},
        {"llm", nlohmann::json{{"endpoint", cfg.llm_endpoint},
                               {"model", cfg.llm_model},
                               {"api_key", cfg.api_key}}},
        {"cost", nlohmann::json{{"input_per_1k", cfg.cost.input_per_1k},
                                {"output_per_1k", cfg.cost.output_per_1k}}}};
}

AppConfig load_config(const std::string& path_or_empty, const EnvReader& getenv_fn) {
    AppConfig cfg;
    if (!path_or_empty.empty()) {
        std::ifstream in(path_or_empty);
        if (!in) throw ConfigError("cannot open config file: " + path_or_empty);
        nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
        if (j.is_discarded()) throw ConfigError("config file is not valid JSON: " + path_or_empty);
        cfg = config_from_json(j);
    }
    const EnvReader env = getenv_fn ? getenv_fn : [](const char* name) -> const char* {
        return std::getenv(name);
    };
    // Environment overrides sit between flags and the config file; secrets
    // and endpoints only.
    if (const char* v = env(kEnvApiKey); v && *v) cfg.api_key = v;
    if (const char* v = env(kEnvLlmEndpoint); v && *v) cfg.llm_endpoint = v;
    if (const char* v = env(kEnvEmbedEndpoint); v && *v) cfg.embed_endpoint = v;
    return cfg;
}

}  // namespace finrag::config
