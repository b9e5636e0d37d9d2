#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>

#include "finrag/agent.hpp"
#include "finrag/corpus.hpp"
#include "finrag/llm.hpp"
#include "finrag/mining.hpp"

namespace finrag::config {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Full application configuration. Resolution precedence per field:
/// command-line flag > environment variable (secrets only) > config file >
/// built-in default.
struct AppConfig {
    agent::AgentConfig agent;          // K, theta, beta, top_k, alpha, capacities
    corpus::ChunkConfig chunking;
    double tau = 0.05;
    int embed_dim = 256;
    std::string provider_kind = "hash";  // hash | http
    std::string embed_endpoint;
    std::string embed_model;
    std::string backend = "scripted:";  // scripted:<path> | http
    std::string llm_endpoint;
    std::string llm_model;
    std::string api_key;
    llm::CostModel cost;
    unsigned seed = 42;
    std::string lexicon_path;  // empty: shipped default
    std::string router_model_path;
    std::string calibration_path;

    void validate() const;
};

/// Environment variables honored (secrets/endpoints only).
inline constexpr const char* kEnvApiKey = "FINRAG_API_KEY";
inline constexpr const char* kEnvLlmEndpoint = "FINRAG_LLM_ENDPOINT";
inline constexpr const char* kEnvEmbedEndpoint = "FINRAG_EMBED_ENDPOINT";

using EnvReader = std::function<const char*(const char*)>;

AppConfig load_config(const std::string& path_or_empty, const EnvReader& getenv_fn = nullptr);
AppConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const AppConfig& cfg);

}  // namespace finrag::config
