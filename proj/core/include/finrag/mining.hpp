#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "finrag/corpus.hpp"
#include "finrag/embed.hpp"

namespace finrag::mining {

class MiningError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Financial metric lexicon, one term per line ("#" comment lines ignored).
using Lexicon = std::vector<std::string>;

Lexicon load_lexicon(const std::string& path);
std::string default_lexicon_path();

enum class Granularity { Segment, Consolidated, Unknown };

struct PassageAttributes {
    std::optional<std::string> metric;   // longest lexicon match, case-folded
    std::optional<std::string> entity;
    std::optional<std::string> period;   // canonical FYyyyy or FYyyyyQn
    Granularity granularity = Granularity::Unknown;

    bool complete() const { return metric && entity && period; }
};

enum class NegativeType { Temporal, MetricSwap, GranularityLevel, EntitySwap };

std::string to_string(NegativeType t);
std::string to_string(Granularity g);

struct ContrastiveConfig {
    double tau = 0.05;
};

/// Canonicalizes period surface forms: "2019" -> FY2019, "Q3 2020" /
/// "2020 Q3" / "third quarter of 2020" -> FY2020Q3, "fiscal 2018" -> FY2018.
std::optional<std::string> parse_period(std::string_view text);

/// All distinct canonical periods mentioned in the text, sorted.
std::vector<std::string> find_periods(std::string_view text);

/// Longest whole-word lexicon term contained in the text (case-folded).
std::optional<std::string> match_metric(std::string_view text, const Lexicon& lexicon);

/// Extracts (metric, entity, period, granularity); entity defaults to the
/// supplied document company, with a best-effort leading proper-noun scan
/// otherwise.
PassageAttributes extract_attributes(const corpus::Passage& passage, const Lexicon& lexicon,
                                     const std::optional<std::string>& doc_company = std::nullopt);

/// 2-of-3 shared-attribute rule over (metric, entity, period); when all three
/// match, a granularity mismatch yields a granularity negative.
std::optional<NegativeType> classify_negative(const PassageAttributes& gold,
                                              const PassageAttributes& cand);

struct MiningQuery {
    std::string query_id;
    std::string gold_passage_id;
};

struct MinedPair {
    std::string query_id;
    std::string gold_id;
    std::string negative_id;
    NegativeType type;
};

struct MiningReport {
    std::vector<MinedPair> pairs;
    std::map<NegativeType, int> counts;
    std::map<NegativeType, double> percentages;  // sum to 100 when any pair exists
    int skipped_queries = 0;                     // gold attributes unextractable
    double average_per_query = 0.0;
};

MiningReport mine_negatives(const std::vector<corpus::Passage>& corpus,
                            const std::vector<MiningQuery>& queries, const Lexicon& lexicon,
                            const std::map<std::string, std::string>& company_by_doc = {});

nlohmann::json mining_report_to_json(const MiningReport& r);
void write_pairs_jsonl(const MiningReport& r, const std::string& path);

/// InfoNCE over cosine similarities:
///   -log( e^{s+/tau} / (e^{s+/tau} + sum_i e^{s-_i/tau}) )
double contrastive_loss(const embed::Vec& query, const embed::Vec& positive,
                        const std::vector<embed::Vec>& negatives,
                        const ContrastiveConfig& cfg = {});

}  // namespace finrag::mining
