#pragma once

#include <memory>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "finrag/corpus.hpp"
#include "finrag/embed.hpp"

namespace finrag::index {

class IndexError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct HybridConfig {
    double alpha = 0.3;     // lexical channel weight
    int top_k = 5;
    double bm25_k1 = 1.2;
    double bm25_b = 0.75;
    int pool_size = 50;     // candidates per channel before rescoring

    void validate() const;
};

struct Posting {
    int passage_idx;
    int term_freq;
};

struct RetrievalResult {
    std::string passage_id;
    double dense_score = 0.0;
    double bm25_score_norm = 0.0;  // min-max normalized over the candidate pool
    double hybrid_score = 0.0;
    int rank = 0;                  // 1-based
};

/// Immutable after build; retrieval is read-only and concurrently callable.
struct Index {
    std::vector<corpus::Passage> passages;
    std::vector<embed::Vec> vectors;                              // aligned 1:1 with passages
    std::unordered_map<std::string, std::vector<Posting>> inverted;  // postings sorted by idx
    std::vector<int> doc_lengths;
    double avg_doc_len = 0.0;
    int n_passages = 0;
    std::string provider_id;
    int dim = 0;

    std::shared_ptr<embed::EmbeddingProvider> provider;  // reattached after load

    const corpus::Passage* find_passage(const std::string& id) const;
};

/// Case-folded alphanumeric terms used by the lexical channel.
std::vector<std::string> index_terms(std::string_view text);

Index build_index(const std::vector<corpus::Passage>& passages,
                  std::shared_ptr<embed::EmbeddingProvider> provider,
                  const HybridConfig& cfg = {});

/// Okapi BM25 with idf = ln((N - df + 0.5) / (df + 0.5) + 1).
double bm25_score(const std::string& query, int passage_idx, const Index& index,
                  const HybridConfig& cfg);

/// Hybrid retrieval: candidate pool is the union of the per-channel top
/// pool_size entries; BM25 scores min-max normalized over the pool;
/// hybrid = (1-alpha)*cosine + alpha*bm25_norm. Excluded ids never appear.
/// Ties broken by passage id ascending.
std::vector<RetrievalResult> retrieve(const std::string& query, const Index& index,
                                      const HybridConfig& cfg,
                                      const std::set<std::string>& exclude = {});

/// Versioned structured-text serialization (vectors + passages; inverted
/// index rebuilt on load).
std::string serialize_index(const Index& index);
Index deserialize_index(const std::string& payload,
                        std::shared_ptr<embed::EmbeddingProvider> provider = nullptr);
void save_index(const Index& index, const std::string& path);
Index load_index(const std::string& path,
                 std::shared_ptr<embed::EmbeddingProvider> provider = nullptr);

}  // namespace finrag::index
