#include "finrag/embed.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include <httplib.h>
#include <json.hpp>

namespace finrag::http {

ParsedUrl parse_url(const std::string& url) {
    ParsedUrl out;
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw std::invalid_argument("url missing scheme: " + url);
    }
    out.scheme = url.substr(0, scheme_end);
    auto rest = url.substr(scheme_end + 3);
    auto slash = rest.find('/');
    if (slash == std::string::npos) {
        out.host_port = rest;
        out.path = "/";
    } else {
        out.host_port = rest.substr(0, slash);
        out.path = rest.substr(slash);
    }
    return out;
}

bool is_retryable_status(int status) {
    return status == 0 || status == 408 || status == 429 || status >= 500;
}

namespace {

class HttplibTransport : public HttpTransport {
public:
    explicit HttplibTransport(int timeout_seconds) : timeout_(timeout_seconds) {}

    HttpResult post(const std::string& url, const std::string& body,
                    const std::map<std::string, std::string>& headers) override {
        ParsedUrl p = parse_url(url);
        httplib::Client client((p.scheme + "://" + p.host_port).c_str());
        client.set_connection_timeout(timeout_, 0);
        client.set_read_timeout(timeout_, 0);
        httplib::Headers h;
        for (const auto& [k, v] : headers) h.emplace(k, v);
        auto res = client.Post(p.path.c_str(), h, body, "application/json");
        HttpResult out;
        if (!res) {
            out.status = 0;
            out.error = httplib::to_string(res.error());
            return out;
        }
        out.status = res->status;
        out.body = res->body;
        return out;
    }

private:
    int timeout_;
};

}  // namespace

std::shared_ptr<HttpTransport> make_default_transport(int timeout_seconds) {
    return std::make_shared<HttplibTransport>(timeout_seconds);
}

}  // namespace finrag::http

namespace finrag::embed {

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

Vec l2_normalize(Vec v) {
    double sq = 0.0;
    for (double x : v) sq += x * x;
    if (sq <= 0.0) return v;
    const double inv = 1.0 / std::sqrt(sq);
    for (double& x : v) x *= inv;
    return v;
}

double cosine(const Vec& u, const Vec& v) {
    if (u.size() != v.size()) {
        throw EmbedError("cosine: dimension mismatch");
    }
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu <= 0.0 || nv <= 0.0) {
        throw EmbedError("cosine: zero vector");
    }
    return dot / (std::sqrt(nu) * std::sqrt(nv));
}

namespace {

std::string casefold(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string_view trimmed(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

}  // namespace

HashEmbeddingProvider::HashEmbeddingProvider(int dim) : dim_(dim) {
    if (dim <= 0) throw EmbedError("embedding dim must be positive");
}

std::string HashEmbeddingProvider::id() const {
    return "hash-3gram-" + std::to_string(dim_);
}

Vec HashEmbeddingProvider::embed(const std::string& text) {
    if (trimmed(text).empty()) {
        throw EmbedError("embed: empty text");
    }
    const std::string folded = casefold(std::string(trimmed(text)));
    Vec v(static_cast<size_t>(dim_), 0.0);
    auto accumulate = [&](std::string_view gram) {
        const std::uint64_t h = fnv1a64(gram);
        const size_t bucket = static_cast<size_t>(h % static_cast<std::uint64_t>(dim_));
        const double sign = ((h >> 32) & 1ULL) ? 1.0 : -1.0;
        v[bucket] += sign;
    };
    if (folded.size() < 3) {
        accumulate(folded);
    } else {
        for (size_t i = 0; i + 3 <= folded.size(); ++i) {
            accumulate(std::string_view(folded).substr(i, 3));
        }
    }
    double sq = 0.0;
    for (double x : v) sq += x * x;
    if (sq == 0.0) {
        // All grams cancelled; fall back to a single deterministic bucket.
        v[static_cast<size_t>(fnv1a64(folded) % static_cast<std::uint64_t>(dim_))] = 1.0;
    }
    return l2_normalize(std::move(v));
}

std::shared_ptr<EmbeddingProvider> make_hash_provider(int dim) {
    return std::make_shared<HashEmbeddingProvider>(dim);
}

HttpEmbeddingProvider::HttpEmbeddingProvider(HttpProviderConfig cfg,
                                             std::shared_ptr<http::HttpTransport> transport)
    : cfg_(std::move(cfg)),
      transport_(transport ? std::move(transport) : http::make_default_transport()) {
    if (cfg_.dim <= 0) throw EmbedError("embedding dim must be positive");
}

std::string HttpEmbeddingProvider::id() const {
    return "http-" + cfg_.model + "-" + std::to_string(cfg_.dim);
}

size_t HttpEmbeddingProvider::cache_size() const {
    std::lock_guard lock(mutex_);
    return cache_.size();
}

Vec HttpEmbeddingProvider::embed(const std::string& text) {
    if (trimmed(text).empty()) {
        throw EmbedError("embed: empty text");
    }
    const std::uint64_t key = fnv1a64(id()) ^ fnv1a64(text);
    {
        std::lock_guard lock(mutex_);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
    }
    Vec v = fetch(text);
    std::lock_guard lock(mutex_);
    auto [it, inserted] = cache_.emplace(key, std::move(v));
    (void)inserted;
    return it->second;
}

Vec HttpEmbeddingProvider::fetch(const std::string& text) {
    nlohmann::json req{{"model", cfg_.model}, {"input", nlohmann::json::array({text})}};
    std::map<std::string, std::string> headers;
    if (!cfg_.api_key.empty()) headers["Authorization"] = "Bearer " + cfg_.api_key;

    http::HttpResult res;
    for (int attempt = 1; attempt <= cfg_.max_attempts; ++attempt) {
        res = transport_->post(cfg_.endpoint, req.dump(), headers);
        if (res.status == 200) break;
        if (!http::is_retryable_status(res.status) || attempt == cfg_.max_attempts) {
            throw EmbedHttpError(res.status, "embedding request failed with status " +
                                                 std::to_string(res.status) +
                                                 (res.error.empty() ? "" : ": " + res.error));
        }
    }
    nlohmann::json body = nlohmann::json::parse(res.body, nullptr, false);
    if (body.is_discarded() || !body.contains("embeddings") || body["embeddings"].empty()) {
        throw EmbedHttpError(res.status, "malformed embeddings response");
    }
    Vec v = body["embeddings"][0].get<Vec>();
    if (static_cast<int>(v.size()) != cfg_.dim) {
        throw EmbedError("provider returned dim " + std::to_string(v.size()) + ", expected " +
                         std::to_string(cfg_.dim));
    }
    for (double x : v) {
        if (!std::isfinite(x)) throw EmbedError("provider returned non-finite component");
    }
    return l2_normalize(std::move(v));
}

}  // namespace finrag::embed
