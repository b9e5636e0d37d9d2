#include "finrag/index.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace finrag::index {

void HybridConfig::validate() const {
    if (alpha < 0.0 || alpha > 1.0) throw IndexError("alpha must be in [0,1]");
    if (top_k < 1) throw IndexError("top_k must be >= 1");
    if (bm25_k1 < 0.0 || bm25_b < 0.0 || bm25_b > 1.0) throw IndexError("invalid BM25 parameters");
    if (pool_size < 1) throw IndexError("pool_size must be >= 1");
}

std::vector<std::string> index_terms(std::string_view text) {
    std::vector<std::string> terms;
    std::string current;
    for (char ch : text) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            current += static_cast<char>(std::tolower(c));
        } else if (!current.empty()) {
            terms.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) terms.push_back(std::move(current));
    return terms;
}

const corpus::Passage* Index::find_passage(const std::string& id) const {
    for (const auto& p : passages) {
        if (p.id == id) return &p;
    }
    return nullptr;
}

Index build_index(const std::vector<corpus::Passage>& passages,
                  std::shared_ptr<embed::EmbeddingProvider> provider, const HybridConfig& cfg) {
    cfg.validate();
    if (passages.empty()) throw IndexError("cannot build index over empty passage list");
    if (!provider) throw IndexError("build_index requires an embedding provider");

    Index idx;
    idx.passages = passages;
    idx.n_passages = static_cast<int>(passages.size());
    idx.provider = provider;
    idx.provider_id = provider->id();
    idx.dim = provider->dim();
    idx.vectors.reserve(passages.size());
    idx.doc_lengths.reserve(passages.size());

    long long total_len = 0;
    for (int i = 0; i < idx.n_passages; ++i) {
        idx.vectors.push_back(provider->embed(passages[static_cast<size_t>(i)].text));
        auto terms = index_terms(passages[static_cast<size_t>(i)].text);
        idx.doc_lengths.push_back(static_cast<int>(terms.size()));
        total_len += static_cast<long long>(terms.size());
        std::unordered_map<std::string, int> tf;
        for (auto& t : terms) ++tf[t];
        for (auto& [term, freq] : tf) {
            idx.inverted[term].push_back({i, freq});
        }
    }
    idx.avg_doc_len =
        idx.n_passages == 0 ? 0.0 : static_cast<double>(total_len) / idx.n_passages;
    for (auto& [term, postings] : idx.inverted) {
        std::sort(postings.begin(), postings.end(),
                  [](const Posting& a, const Posting& b) { return a.passage_idx < b.passage_idx; });
    }
    return idx;
}

double bm25_score(const std::string& query, int passage_idx, const Index& index,
                  const HybridConfig& cfg) {
    if (passage_idx < 0 || passage_idx >= index.n_passages) {
        throw IndexError("passage index out of range");
    }
    auto query_terms = index_terms(query);
    std::sort(query_terms.begin(), query_terms.end());
    query_terms.erase(std::unique(query_terms.begin(), query_terms.end()), query_terms.end());

    const double dl = index.doc_lengths[static_cast<size_t>(passage_idx)];
    const double avg = index.avg_doc_len > 0 ? index.avg_doc_len : 1.0;
    const double n = index.n_passages;

    double score = 0.0;
    for (const auto& term : query_terms) {
        auto it = index.inverted.find(term);
        if (it == index.inverted.end()) continue;
        const auto& postings = it->second;
        auto pit = std::lower_bound(
            postings.begin(), postings.end(), passage_idx,
            [](const Posting& p, int idx) { return p.passage_idx < idx; });
        if (pit == postings.end() || pit->passage_idx != passage_idx) continue;
        const double df = static_cast<double>(postings.size());
        const double tf = static_cast<double>(pit->term_freq);
        const double idf = std::log((n - df + 0.5) / (df + 0.5) + 1.0);
        const double tf_part =
            (tf * (cfg.bm25_k1 + 1.0)) /
            (tf + cfg.bm25_k1 * (1.0 - cfg.bm25_b + cfg.bm25_b * dl / avg));
        score += idf * tf_part;
    }
    return score;
}

namespace {

struct Scored {
    int idx;
    double score;
};

// Top-n by score descending, ties by passage id ascending.
std::vector<Scored> top_n(std::vector<Scored> scored, size_t n, const Index& index) {
    std::sort(scored.begin(), scored.end(), [&](const Scored& a, const Scored& b) {
        if (a.score != b.score) return a.score > b.score;
        return index.passages[static_cast<size_t>(a.idx)].id <
               index.passages[static_cast<size_t>(b.idx)].id;
    });
    if (scored.size() > n) scored.resize(n);
    return scored;
}

}  // namespace

std::vector<RetrievalResult> retrieve(const std::string& query, const Index& index,
                                      const HybridConfig& cfg,
                                      const std::set<std::string>& exclude) {
    cfg.validate();
    if (index.n_passages == 0) return {};
    if (!index.provider) throw IndexError("retrieve requires an attached embedding provider");

    const embed::Vec q = index.provider->embed(query);

    std::vector<int> candidates;
    candidates.reserve(static_cast<size_t>(index.n_passages));
    for (int i = 0; i < index.n_passages; ++i) {
        if (exclude.count(index.passages[static_cast<size_t>(i)].id)) continue;
        candidates.push_back(i);
    }
    if (candidates.empty()) return {};

    std::vector<Scored> dense;
    std::vector<Scored> lexical;
    dense.reserve(candidates.size());
    lexical.reserve(candidates.size());
    std::unordered_map<int, double> dense_by_idx;
    std::unordered_map<int, double> bm25_by_idx;
    for (int i : candidates) {
        const double d = embed::cosine(q, index.vectors[static_cast<size_t>(i)]);
        const double b = bm25_score(query, i, index, cfg);
        dense_by_idx[i] = d;
        bm25_by_idx[i] = b;
        dense.push_back({i, d});
        lexical.push_back({i, b});
    }
    const size_t pool_n = static_cast<size_t>(cfg.pool_size);
    auto dense_top = top_n(std::move(dense), pool_n, index);
    auto lex_top = top_n(std::move(lexical), pool_n, index);

    std::set<int> pool;
    for (const auto& s : dense_top) pool.insert(s.idx);
    for (const auto& s : lex_top) pool.insert(s.idx);

    double bmin = 0.0, bmax = 0.0;
    bool first = true;
    for (int i : pool) {
        const double b = bm25_by_idx[i];
        if (first) {
            bmin = bmax = b;
            first = false;
        } else {
            bmin = std::min(bmin, b);
            bmax = std::max(bmax, b);
        }
    }
    const double range = bmax - bmin;

    std::vector<RetrievalResult> results;
    results.reserve(pool.size());
    for (int i : pool) {
        RetrievalResult r;
        r.passage_id = index.passages[static_cast<size_t>(i)].id;
        r.dense_score = dense_by_idx[i];
        r.bm25_score_norm = range > 1e-12 ? (bm25_by_idx[i] - bmin) / range : 0.0;
        r.hybrid_score = (1.0 - cfg.alpha) * r.dense_score + cfg.alpha * r.bm25_score_norm;
        results.push_back(std::move(r));
    }
    std::sort(results.begin(), results.end(),
              [](const RetrievalResult& a, const RetrievalResult& b) {
                  if (a.hybrid_score != b.hybrid_score) return a.hybrid_score > b.hybrid_score;
                  return a.passage_id < b.passage_id;
              });
    if (results.size() > static_cast<size_t>(cfg.top_k)) {
        results.resize(static_cast<size_t>(cfg.top_k));
    }
    for (size_t i = 0; i < results.size(); ++i) {
        results[i].rank = static_cast<int>(i) + 1;
    }
    return results;
}

std::string serialize_index(const Index& index) {
    nlohmann::json j;
    j["format"] = "finrag-index";
    j["version"] = 1;
    j["provider_id"] = index.provider_id;
    j["dim"] = index.dim;
    nlohmann::json passages = nlohmann::json::array();
    for (const auto& p : index.passages) passages.push_back(corpus::passage_to_json(p));
    j["passages"] = std::move(passages);
    j["vectors"] = index.vectors;
    return j.dump();
}

Index deserialize_index(const std::string& payload,
                        std::shared_ptr<embed::EmbeddingProvider> provider) {
    nlohmann::json j = nlohmann::json::parse(payload);
    if (j.value("format", "") != "finrag-index") throw IndexError("not an index file");
    if (j.value("version", 0) != 1) throw IndexError("unsupported index version");

    std::vector<corpus::Passage> passages;
    for (const auto& jp : j.at("passages")) passages.push_back(corpus::passage_from_json(jp));
    std::vector<embed::Vec> vectors = j.at("vectors").get<std::vector<embed::Vec>>();
    if (vectors.size() != passages.size()) throw IndexError("vector/passage count mismatch");

    // Rebuild by reusing build_index's lexical pass, then swap in the stored
    // vectors so no provider calls are needed at load time.
    struct StoredVectors : embed::EmbeddingProvider {
        int d;
        explicit StoredVectors(int dim) : d(dim) {}
        embed::Vec embed(const std::string&) override {
            return embed::Vec(static_cast<size_t>(d), 0.0);
        }
        int dim() const override { return d; }
        std::string id() const override { return "stored"; }
    };
    Index idx = build_index(passages, std::make_shared<StoredVectors>(j.at("dim").get<int>()));
    idx.vectors = std::move(vectors);
    idx.provider_id = j.at("provider_id").get<std::string>();
    idx.dim = j.at("dim").get<int>();
    idx.provider = std::move(provider);
    if (idx.provider && idx.provider->dim() != idx.dim) {
        throw IndexError("attached provider dim does not match index dim");
    }
    return idx;
}

void save_index(const Index& index, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IndexError("cannot write index file: " + path);
    out << serialize_index(index);
}

Index load_index(const std::string& path, std::shared_ptr<embed::EmbeddingProvider> provider) {
    std::ifstream in(path);
    if (!in) throw IndexError("cannot open index file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return deserialize_index(ss.str(), std::move(provider));
}

}  // namespace finrag::index
