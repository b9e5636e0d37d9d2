#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "finrag/http.hpp"

namespace finrag::embed {

using Vec = std::vector<double>;

class EmbedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// HTTP embedding failure carrying the response status; retryable per
/// http::is_retryable_status.
class EmbedHttpError : public EmbedError {
public:
    EmbedHttpError(int status, const std::string& what) : EmbedError(what), status_(status) {}
    int status() const { return status_; }

private:
    int status_ = 0;
};

double cosine(const Vec& u, const Vec& v);

/// Portable 64-bit FNV-1a; used everywhere a platform-stable hash is needed.
std::uint64_t fnv1a64(std::string_view data);

/// Thread-safe provider of L2-normalized embedding vectors.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual Vec embed(const std::string& text) = 0;
    virtual int dim() const = 0;
    virtual std::string id() const = 0;
};

/// Deterministic offline embedder: case-folded character 3-grams are
/// feature-hashed with a sign bit into dim buckets, then L2-normalized.
/// Pure function of the input string; identical across runs and platforms.
class HashEmbeddingProvider : public EmbeddingProvider {
public:
    explicit HashEmbeddingProvider(int dim = 256);
    Vec embed(const std::string& text) override;
    int dim() const override { return dim_; }
    std::string id() const override;

private:
    int dim_;
};

struct HttpProviderConfig {
    std::string endpoint;   // full URL of the embeddings route
    std::string model;
    std::string api_key;
    int dim = 768;
    int max_attempts = 3;
};

/// Speaks the prevailing embeddings-API wire shape:
///   {model, input:[texts]} -> {embeddings:[[floats]]}.
/// Embeddings are cached by (provider id, text hash); cache reads are
/// atomic read-through.
class HttpEmbeddingProvider : public EmbeddingProvider {
public:
    HttpEmbeddingProvider(HttpProviderConfig cfg,
                          std::shared_ptr<http::HttpTransport> transport = nullptr);
    Vec embed(const std::string& text) override;
    int dim() const override { return cfg_.dim; }
    std::string id() const override;

    size_t cache_size() const;

private:
    Vec fetch(const std::string& text);

    HttpProviderConfig cfg_;
    std::shared_ptr<http::HttpTransport> transport_;
    mutable std::mutex mutex_;
    std::unordered_map<std::uint64_t, Vec> cache_;
};

Vec l2_normalize(Vec v);

std::shared_ptr<EmbeddingProvider> make_hash_provider(int dim = 256);

}  // namespace finrag::embed
