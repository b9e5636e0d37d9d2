#include <doctest.h>

#include <cmath>
#include <random>

#include <json.hpp>

#include "finrag/embed.hpp"

using namespace finrag;
using embed::Vec;

namespace {

class FakeTransport : public http::HttpTransport {
public:
    std::vector<int> statuses;  // consumed in order; last repeats
    int calls = 0;
    int dim = 4;

    http::HttpResult post(const std::string&, const std::string& body,
                          const std::map<std::string, std::string>&) override {
        ++calls;
        const int status = statuses.empty()
                               ? 200
                               : statuses[std::min(static_cast<size_t>(calls - 1),
                                                   statuses.size() - 1)];
        http::HttpResult r;
        r.status = status;
        if (status == 200) {
            auto req = nlohmann::json::parse(body);
            const std::string text = req["input"][0].get<std::string>();
            Vec v(static_cast<size_t>(dim), 0.0);
            for (size_t i = 0; i < v.size(); ++i) {
                v[i] = static_cast<double>((text.size() + i) % 7) + 1.0;
            }
            r.body = nlohmann::json{{"embeddings", nlohmann::json::array({v})}}.dump();
        }
        return r;
    }
};

}  // namespace

TEST_CASE("hash embedder is deterministic and case-folded") {
    embed::HashEmbeddingProvider p(256);
    const Vec a = p.embed("revenue");
    const Vec b = p.embed("revenue");
    const Vec c = p.embed("Revenue");
    CHECK(a == b);
    CHECK(a == c);
}

TEST_CASE("hash embeddings are unit length") {
    embed::HashEmbeddingProvider p(256);
    for (const char* text : {"revenue", "operating expenses in Q3 2019", "x", "ab"}) {
        const Vec v = p.embed(text);
        double sq = 0.0;
        for (double x : v) sq += x * x;
        CHECK(std::fabs(std::sqrt(sq) - 1.0) < 1e-9);
    }
}

TEST_CASE("empty text is rejected") {
    embed::HashEmbeddingProvider p(64);
    CHECK_THROWS_AS(p.embed(""), embed::EmbedError);
    CHECK_THROWS_AS(p.embed("   "), embed::EmbedError);
}

TEST_CASE("cosine identities") {
    CHECK(embed::cosine({1, 0}, {1, 0}) == doctest::Approx(1.0));
    CHECK(embed::cosine({1, 0}, {0, 1}) == doctest::Approx(0.0));
    CHECK(embed::cosine({1, 1}, {1, 0}) == doctest::Approx(0.7071).epsilon(1e-4));
    embed::HashEmbeddingProvider p(128);
    const Vec v = p.embed("free cash flow");
    CHECK(embed::cosine(v, v) == doctest::Approx(1.0));
}

TEST_CASE("cosine rejects dim mismatches and zero vectors") {
    CHECK_THROWS_AS(embed::cosine({1, 0}, {1, 0, 0}), embed::EmbedError);
    CHECK_THROWS_AS(embed::cosine({0, 0}, {1, 0}), embed::EmbedError);
}

TEST_CASE("cosine symmetry and bound on random vectors") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        Vec u(16), v(16);
        for (auto& x : u) x = dist(rng);
        for (auto& x : v) x = dist(rng);
        const double uv = embed::cosine(u, v);
        CHECK(uv == doctest::Approx(embed::cosine(v, u)));
        CHECK(std::fabs(uv) <= 1.0 + 1e-12);
    }
}

TEST_CASE("similar strings score higher than unrelated ones") {
    embed::HashEmbeddingProvider p(256);
    const double related = embed::cosine(p.embed("operating expenses in 2019"),
                                         p.embed("operating expenses in 2020"));
    const double unrelated = embed::cosine(p.embed("operating expenses in 2019"),
                                           p.embed("zqx jvw kpt"));
    CHECK(related > unrelated);
}

TEST_CASE("http provider caches by text and normalizes") {
    auto transport = std::make_shared<FakeTransport>();
    embed::HttpProviderConfig cfg;
    cfg.endpoint = "http://embed.local/v1/embeddings";
    cfg.model = "test-embed";
    cfg.dim = 4;
    embed::HttpEmbeddingProvider p(cfg, transport);

    const Vec a = p.embed("revenue");
    CHECK(transport->calls == 1);
    const Vec b = p.embed("revenue");
    CHECK(transport->calls == 1);  // cache hit, no second request
    CHECK(a == b);
    CHECK(p.cache_size() == 1);
    double sq = 0.0;
    for (double x : a) sq += x * x;
    CHECK(std::fabs(std::sqrt(sq) - 1.0) < 1e-9);
}

TEST_CASE("http provider retries retryable statuses then succeeds") {
    auto transport = std::make_shared<FakeTransport>();
    transport->statuses = {500, 429, 200};
    embed::HttpProviderConfig cfg;
    cfg.endpoint = "http://embed.local/v1/embeddings";
    cfg.model = "test-embed";
    cfg.dim = 4;
    embed::HttpEmbeddingProvider p(cfg, transport);
    CHECK_NOTHROW(p.embed("revenue"));
    CHECK(transport->calls == 3);
}

TEST_CASE("http provider surfaces the failing status") {
    auto transport = std::make_shared<FakeTransport>();
    transport->statuses = {401};
    embed::HttpProviderConfig cfg;
    cfg.endpoint = "http://embed.local/v1/embeddings";
    cfg.model = "test-embed";
    cfg.dim = 4;
    embed::HttpEmbeddingProvider p(cfg, transport);
    try {
        p.embed("revenue");
        FAIL("expected EmbedHttpError");
    } catch (const embed::EmbedHttpError& e) {
        CHECK(e.status() == 401);
        CHECK(transport->calls == 1);  // auth failures are not retried
    }
}

TEST_CASE("url parsing") {
    auto u = http::parse_url("http://host:8080/v1/embeddings");
    CHECK(u.scheme == "http");
    CHECK(u.host_port == "host:8080");
    CHECK(u.path == "/v1/embeddings");
    CHECK_THROWS(http::parse_url("no-scheme/path"));
}
