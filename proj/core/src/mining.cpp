#include "finrag/mining.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

namespace finrag::mining {

namespace {

std::string fold(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

// Whole-word substring search on already-folded haystack/needle.
bool contains_word(const std::string& hay, const std::string& needle) {
    if (needle.empty()) return false;
    size_t pos = 0;
    while ((pos = hay.find(needle, pos)) != std::string::npos) {
        const bool left_ok = pos == 0 || !is_word_char(hay[pos - 1]);
        const size_t end = pos + needle.size();
        const bool right_ok = end >= hay.size() || !is_word_char(hay[end]);
        if (left_ok && right_ok) return true;
        ++pos;
    }
    return false;
}

}  // namespace

std::string to_string(NegativeType t) {
    switch (t) {
        case NegativeType::Temporal: return "temporal";
        case NegativeType::MetricSwap: return "metric_swap";
        case NegativeType::GranularityLevel: return "granularity";
        case NegativeType::EntitySwap: return "entity_swap";
    }
    return "temporal";
}

std::string to_string(Granularity g) {
    switch (g) {
        case Granularity::Segment: return "segment";
        case Granularity::Consolidated: return "consolidated";
        case Granularity::Unknown: return "unknown";
    }
    return "unknown";
}

Lexicon load_lexicon(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MiningError("cannot open lexicon file: " + path);
    Lexicon lex;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        lex.push_back(fold(line));
    }
    if (lex.empty()) throw MiningError("lexicon file has no terms: " + path);
    return lex;
}

std::string default_lexicon_path() {
#ifdef FINRAG_SOURCE_DATA_DIR
    return std::string(FINRAG_SOURCE_DATA_DIR) + "/financial_lexicon_v1.txt";
#else
    return "data/financial_lexicon_v1.txt";
#endif
}

std::optional<std::string> parse_period(std::string_view text) {
    auto periods = find_periods(text);
    if (periods.empty()) return std::nullopt;
    return periods.front();
}

std::vector<std::string> find_periods(std::string_view text) {
    static const std::regex q_year(R"(\bq([1-4])\s+(?:of\s+)?(?:fy\s*)?((?:19|20)\d{2})\b)");
    static const std::regex year_q(R"(\b((?:19|20)\d{2})\s+q([1-4])\b)");
    static const std::regex word_q(
        R"(\b(first|second|third|fourth)\s+quarter\s+(?:of\s+)?(?:fiscal\s+(?:year\s+)?)?((?:19|20)\d{2})\b)");
    static const std::regex fiscal_year(R"(\b(?:fiscal(?:\s+year)?|fy)\s*((?:19|20)\d{2})\b)");
    static const std::regex bare_year(R"(\b((?:19|20)\d{2})\b)");

    const std::string folded = fold(text);
    std::set<std::string> found;
    std::set<size_t> year_positions_used;

    auto scan = [&](const std::regex& re, auto&& make) {
        auto begin = std::sregex_iterator(folded.begin(), folded.end(), re);
        for (auto it = begin; it != std::sregex_iterator(); ++it) {
            found.insert(make(*it));
            // Remember which year literals participate in a richer pattern so
            // the bare-year pass does not re-report them.
            for (size_t g = 1; g < it->size(); ++g) {
                const auto& sub = (*it)[g];
                if (sub.matched && sub.length() == 4) {
                    year_positions_used.insert(static_cast<size_t>(sub.first - folded.begin()));
                }
            }
        }
    };
    scan(q_year, [](const std::smatch& m) { return "FY" + m[2].str() + "Q" + m[1].str(); });
    scan(year_q, [](const std::smatch& m) { return "FY" + m[1].str() + "Q" + m[2].str(); });
    scan(word_q, [](const std::smatch& m) {
        static const std::map<std::string, std::string> ord{
            {"first", "1"}, {"second", "2"}, {"third", "3"}, {"fourth", "4"}};
        return "FY" + m[2].str() + "Q" + ord.at(m[1].str());
    });
    scan(fiscal_year, [](const std::smatch& m) { return "FY" + m[1].str(); });

    auto begin = std::sregex_iterator(folded.begin(), folded.end(), bare_year);
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
        const size_t pos = static_cast<size_t>((*it)[1].first - folded.begin());
        if (year_positions_used.count(pos)) continue;
        found.insert("FY" + (*it)[1].str());
    }
    return {found.begin(), found.end()};
}

std::optional<std::string> match_metric(std::string_view text, const Lexicon& lexicon) {
    const std::string folded = fold(text);
    std::optional<std::string> best;
    for (const auto& term : lexicon) {
        if (best && term.size() < best->size()) continue;
        if (!contains_word(folded, term)) continue;
        if (!best || term.size() > best->size() || term < *best) {
            best = term;
        }
    }
    return best;
}

namespace {

const std::vector<std::string>& segment_markers() {
    static const std::vector<std::string> markers{
        "segment",      "segments",      "division",     "divisions",   "business unit",
        "americas",     "asia-pacific",  "asia pacific", "emea",        "europe",
        "north america", "latin america", "international", "domestic",   "subsidiary"};
    return markers;
}

Granularity detect_granularity(const std::string& folded) {
    for (const auto& m : segment_markers()) {
        if (contains_word(folded, m)) return Granularity::Segment;
    }
    if (contains_word(folded, "total") || contains_word(folded, "consolidated")) {
        return Granularity::Consolidated;
    }
    return Granularity::Unknown;
}

// Best-effort in-text entity: a leading capitalized span followed by a
// reporting verb ("Acme Corp reported ...").
std::optional<std::string> leading_entity(const std::string& text) {
    static const std::regex re(
        R"(^\s*((?:[A-Z][A-Za-z&.\-]*\s+){0,3}[A-Z][A-Za-z&.\-]*)\s+(?:reported|posted|recorded|announced|generated|had|incurred|earned)\b)");
    std::smatch m;
    if (std::regex_search(text, m, re)) {
        return m[1].str();
    }
    return std::nullopt;
}

}  // namespace

PassageAttributes extract_attributes(const corpus::Passage& passage, const Lexicon& lexicon,
                                     const std::optional<std::string>& doc_company) {
    if (lexicon.empty()) throw MiningError("extract_attributes requires a non-empty lexicon");
    PassageAttributes attrs;
    const std::string folded = fold(passage.text);
    attrs.metric = match_metric(passage.text, lexicon);
    attrs.period = parse_period(passage.text);
    if (doc_company && !doc_company->empty()) {
        attrs.entity = fold(*doc_company);
    } else if (auto e = leading_entity(passage.text)) {
        attrs.entity = fold(*e);
    }
    attrs.granularity = detect_granularity(folded);
    return attrs;
}

std::optional<NegativeType> classify_negative(const PassageAttributes& gold,
                                              const PassageAttributes& cand) {
    if (!gold.complete()) {
        throw MiningError("classify_negative requires gold metric, entity and period");
    }
    const bool metric_same = cand.metric && *cand.metric == *gold.metric;
    const bool entity_same = cand.entity && *cand.entity == *gold.entity;
    const bool period_same = cand.period && *cand.period == *gold.period;
    const bool metric_diff = cand.metric && *cand.metric != *gold.metric;
    const bool entity_diff = cand.entity && *cand.entity != *gold.entity;
    const bool period_diff = cand.period && *cand.period != *gold.period;

    if (metric_same && entity_same && period_same) {
        if (gold.granularity != Granularity::Unknown && cand.granularity != Granularity::Unknown &&
            gold.granularity != cand.granularity) {
            return NegativeType::GranularityLevel;
        }
        return std::nullopt;  // identical attributes: not a negative
    }
    if (metric_same && entity_same && period_diff) return NegativeType::Temporal;
    if (entity_same && period_same && metric_diff) return NegativeType::MetricSwap;
    if (metric_same && period_same && entity_diff) return NegativeType::EntitySwap;
    return std::nullopt;
}

MiningReport mine_negatives(const std::vector<corpus::Passage>& corpus,
                            const std::vector<MiningQuery>& queries, const Lexicon& lexicon,
                            const std::map<std::string, std::string>& company_by_doc) {
    MiningReport report;
    auto company_of = [&](const corpus::Passage& p) -> std::optional<std::string> {
        auto it = company_by_doc.find(p.doc_id);
        if (it == company_by_doc.end()) return std::nullopt;
        return it->second;
    };

    int usable_queries = 0;
    for (const auto& q : queries) {
        const corpus::Passage* gold = nullptr;
        for (const auto& p : corpus) {
            if (p.id == q.gold_passage_id) {
                gold = &p;
                break;
            }
        }
        if (!gold) {
            ++report.skipped_queries;
            continue;
        }
        const PassageAttributes gold_attrs = extract_attributes(*gold, lexicon, company_of(*gold));
        if (!gold_attrs.complete()) {
            ++report.skipped_queries;
            continue;
        }
        ++usable_queries;
        for (const auto& cand : corpus) {
            if (cand.id == gold->id) continue;
            const PassageAttributes cand_attrs =
                extract_attributes(cand, lexicon, company_of(cand));
            if (auto type = classify_negative(gold_attrs, cand_attrs)) {
                report.pairs.push_back({q.query_id, gold->id, cand.id, *type});
                ++report.counts[*type];
            }
        }
    }
    const double total = static_cast<double>(report.pairs.size());
    if (total > 0) {
        for (const auto& [type, count] : report.counts) {
            report.percentages[type] = 100.0 * static_cast<double>(count) / total;
        }
    }
    report.average_per_query = usable_queries > 0 ? total / usable_queries : 0.0;
    return report;
}

nlohmann::json mining_report_to_json(const MiningReport& r) {
    nlohmann::json counts = nlohmann::json::object();
    nlohmann::json percentages = nlohmann::json::object();
    for (const auto& [type, count] : r.counts) counts[to_string(type)] = count;
    for (const auto& [type, pct] : r.percentages) percentages[to_string(type)] = pct;
    return nlohmann::json{{"total_pairs", r.pairs.size()},
                          {"counts", counts},
                          {"percentages", percentages},
                          {"skipped_queries", r.skipped_queries},
                          {"average_per_query", r.average_per_query}};
}

void write_pairs_jsonl(const MiningReport& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw MiningError("cannot write pairs file: " + path);
    for (const auto& p : r.pairs) {
        out << nlohmann::json{{"query_id", p.query_id},
                              {"gold_id", p.gold_id},
                              {"negative_id", p.negative_id},
                              {"type", to_string(p.type)}}
                   .dump()
            << '\n';
    }
}

double contrastive_loss(const embed::Vec& query, const embed::Vec& positive,
                        const std::vector<embed::Vec>& negatives, const ContrastiveConfig& cfg) {
    if (cfg.tau <= 0.0) throw MiningError("tau must be positive");
    const double pos_sim = embed::cosine(query, positive);
    if (negatives.empty()) return 0.0;
    // Numerically stable: loss = log(1 + sum_i exp((s-_i - s+)/tau)).
    double sum = 0.0;
    for (const auto& neg : negatives) {
        const double s = embed::cosine(query, neg);
        sum += std::exp((s - pos_sim) / cfg.tau);
    }
    return std::log1p(sum);
}

}  // namespace finrag::mining
