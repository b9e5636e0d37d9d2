#include "finrag/router.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <regex>
#include <set>

#include "finrag/corpus.hpp"

namespace finrag::router {

std::string to_string(Route r) {
    return r == Route::Simple ? "simple" : "complex";
}

namespace {

std::string fold(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

const std::vector<std::string>& comparative_phrases() {
    static const std::vector<std::string> phrases{
        "more than",   "less than",   "greater than", "higher than", "lower than",
        "highest",     "lowest",      "largest",      "smallest",    "biggest",
        "best",        "worst",       "compared to",  "compared with", "versus",
        " vs ",        " vs.",        "exceed",       "outperform",  "top ",
        "most ",       "least "};
    return phrases;
}

bool has_comparative_phrase(const std::string& folded) {
    for (const auto& p : comparative_phrases()) {
        if (folded.find(p) != std::string::npos) return true;
    }
    // "-er than" comparatives: any word ending in "er" followed by "than".
    static const std::regex er_than(R"(\b\w+er\s+than\b)");
    return std::regex_search(folded, er_than);
}

bool has_yoy(const std::string& folded) {
    if (folded.find("year-over-year") != std::string::npos) return true;
    if (folded.find("year over year") != std::string::npos) return true;
    if (folded.find("yoy") != std::string::npos) return true;
    static const std::regex from_to(R"(\bfrom\s+(?:19|20)\d{2}\s+to\s+(?:19|20)\d{2}\b)");
    return std::regex_search(folded, from_to);
}

// Distinct numeric literals that are not period years (years are counted by
// the temporal group).
int count_non_period_numbers(const std::string& folded) {
    static const std::regex num_re(R"((\d[\d,]*\.?\d*))");
    static const std::regex year_re(R"(^(?:19|20)\d{2}$)");
    std::set<std::string> values;
    auto begin = std::sregex_iterator(folded.begin(), folded.end(), num_re);
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
        std::string v = it->str();
        if (std::regex_match(v, year_re)) continue;
        values.insert(v);
    }
    return static_cast<int>(values.size());
}

}  // namespace

RouterFeatures extract_features(const std::string& question,
                                const std::vector<reason::SubQuestion>& decomposition,
                                const mining::Lexicon& lexicon,
                                const std::vector<std::string>& company_names) {
    RouterFeatures f;
    const std::string folded = fold(question);

    // Syntactic group.
    f.values[0] = static_cast<double>(corpus::count_tokens(question));
    f.values[1] = has_comparative_phrase(folded) ? 1.0 : 0.0;
    int entities = 0;
    {
        // Whole-word matches only; the boundary test keeps "net" from
        // matching inside "internet".
        auto matches_word = [&folded](const std::string& term) {
            size_t pos = 0;
            while ((pos = folded.find(term, pos)) != std::string::npos) {
                const bool left_ok =
                    pos == 0 || !std::isalnum(static_cast<unsigned char>(folded[pos - 1]));
                const size_t end = pos + term.size();
                const bool right_ok =
                    end >= folded.size() || !std::isalnum(static_cast<unsigned char>(folded[end]));
                if (left_ok && right_ok) return true;
                ++pos;
            }
            return false;
        };
        std::set<std::string> hits;
        for (const auto& term : lexicon) {
            if (matches_word(term)) hits.insert(term);
        }
        // Keep only maximal terms: drop any hit contained in a longer hit.
        for (const auto& h : hits) {
            bool contained = false;
            for (const auto& other : hits) {
                if (other.size() > h.size() && other.find(h) != std::string::npos) {
                    contained = true;
                    break;
                }
            }
            if (!contained) ++entities;
        }
        for (const auto& name : company_names) {
            if (!name.empty() && folded.find(fold(name)) != std::string::npos) ++entities;
        }
    }
    f.values[2] = static_cast<double>(entities);
    f.values[3] = static_cast<double>(count_non_period_numbers(folded));

    // Decomposition group.
    f.values[4] = static_cast<double>(decomposition.size());
    const bool any_computation =
        std::any_of(decomposition.begin(), decomposition.end(), [](const auto& sq) {
            return sq.tag == reason::SubQuestionTag::Computation;
        });
    f.values[5] = any_computation ? 2.0 : 1.0;

    // Temporal group.
    const auto periods = mining::find_periods(question);
    f.values[6] = static_cast<double>(periods.size());
    f.values[7] = has_yoy(folded) ? 1.0 : 0.0;
    int min_year = 0, max_year = 0;
    for (const auto& p : periods) {
        const int year = std::stoi(p.substr(2, 4));
        if (min_year == 0 || year < min_year) min_year = year;
        if (year > max_year) max_year = year;
    }
    f.values[8] = min_year > 0 ? static_cast<double>(max_year - min_year) : 0.0;

    // Computation one-hot.
    const int n_comp = static_cast<int>(
        std::count_if(decomposition.begin(), decomposition.end(), [](const auto& sq) {
            return sq.tag == reason::SubQuestionTag::Computation;
        }));
    const bool lookup = decomposition.size() == 1 && n_comp == 0;
    const bool single_step = n_comp == 1;
    f.values[9] = lookup ? 1.0 : 0.0;
    f.values[10] = (!lookup && single_step) ? 1.0 : 0.0;
    f.values[11] = (!lookup && !single_step) ? 1.0 : 0.0;
    return f;
}

double Tree::predict(const std::array<double, RouterFeatures::kDim>& x) const {
    int node = 0;
    while (nodes[static_cast<size_t>(node)].feature >= 0) {
        const auto& n = nodes[static_cast<size_t>(node)];
        node = x[static_cast<size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<size_t>(node)].leaf_value;
}

double GbdtModel::raw_score(const RouterFeatures& f) const {
    double score = base_score;
    for (const auto& t : trees) score += learning_rate * t.predict(f.values);
    return score;
}

double GbdtModel::probability(const RouterFeatures& f) const {
    return 1.0 / (1.0 + std::exp(-raw_score(f)));
}

RouteDecision route(const RouterFeatures& f, const RouterModel& model) {
    RouteDecision d;
    if (model.kind == RouterModel::Kind::Heuristic) {
        const bool complex = f.is_multi_step() >= 0.5 || f.n_distinct_periods() >= 2.0 ||
                             f.n_subquestions() >= 3.0;
        d.route = complex ? Route::Complex : Route::Simple;
        d.score = complex ? 1.0 : 0.0;
        return d;
    }
    d.score = model.gbdt.probability(f);
    d.route = d.score >= 0.5 ? Route::Complex : Route::Simple;
    return d;
}

std::vector<bool> derive_labels(const std::vector<std::string>& question_ids,
                                const std::map<std::string, bool>& single_pass_correct,
                                const std::map<std::string, bool>& full_loop_correct) {
    std::vector<bool> labels;
    labels.reserve(question_ids.size());
    for (const auto& id : question_ids) {
        auto s = single_pass_correct.find(id);
        auto f = full_loop_correct.find(id);
        if (s == single_pass_correct.end() || f == full_loop_correct.end()) {
            throw RouterError("result sets do not cover question id: " + id);
        }
        labels.push_back(f->second && !s->second);  // complex = full fixes it
    }
    return labels;
}

namespace {

struct TrainData {
    const std::vector<RouterFeatures>* features;
    std::vector<double> gradient;  // y - p
    std::vector<double> hessian;   // p (1 - p)
};

struct SplitChoice {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

double leaf_weight(const TrainData& d, const std::vector<int>& idx, double lambda) {
    double g = 0.0, h = 0.0;
    for (int i : idx) {
        g += d.gradient[static_cast<size_t>(i)];
        h += d.hessian[static_cast<size_t>(i)];
    }
    return g / (h + lambda);
}

double score_of(double g, double h, double lambda) {
    return g * g / (h + lambda);
}

SplitChoice best_split(const TrainData& d, const std::vector<int>& idx, int min_leaf,
                       double lambda) {
    SplitChoice best;
    double g_total = 0.0, h_total = 0.0;
    for (int i : idx) {
        g_total += d.gradient[static_cast<size_t>(i)];
        h_total += d.hessian[static_cast<size_t>(i)];
    }
    const double parent = score_of(g_total, h_total, lambda);

    for (int feat = 0; feat < RouterFeatures::kDim; ++feat) {
        std::vector<std::pair<double, int>> order;
        order.reserve(idx.size());
        for (int i : idx) {
            order.emplace_back((*d.features)[static_cast<size_t>(i)].values[static_cast<size_t>(feat)], i);
        }
        std::sort(order.begin(), order.end());
        double g_left = 0.0, h_left = 0.0;
        for (size_t k = 0; k + 1 < order.size(); ++k) {
            const int i = order[k].second;
            g_left += d.gradient[static_cast<size_t>(i)];
            h_left += d.hessian[static_cast<size_t>(i)];
            if (order[k].first == order[k + 1].first) continue;  // no boundary here
            const size_t n_left = k + 1;
            const size_t n_right = order.size() - n_left;
            if (n_left < static_cast<size_t>(min_leaf) || n_right < static_cast<size_t>(min_leaf)) {
                continue;
            }
            const double gain = score_of(g_left, h_left, lambda) +
                                score_of(g_total - g_left, h_total - h_left, lambda) - parent;
            const double threshold = (order[k].first + order[k + 1].first) / 2.0;
            // Deterministic tie-break: larger gain, then lower feature index,
            // then lower threshold.
            if (!best.found || gain > best.gain + 1e-12 ||
                (std::abs(gain - best.gain) <= 1e-12 &&
                 (feat < best.feature ||
                  (feat == best.feature && threshold < best.threshold)))) {
                if (gain > 1e-12) {
                    best.found = true;
                    best.feature = feat;
                    best.threshold = threshold;
                    best.gain = gain;
                }
            }
        }
    }
    return best;
}

int build_node(Tree& tree, const TrainData& d, const std::vector<int>& idx, int depth,
               const GbdtParams& params) {
    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();

    SplitChoice split;
    if (depth < params.max_depth && idx.size() >= 2 * static_cast<size_t>(params.min_leaf)) {
        split = best_split(d, idx, params.min_leaf, params.lambda);
    }
    if (!split.found) {
        tree.nodes[static_cast<size_t>(node_id)].feature = -1;
        tree.nodes[static_cast<size_t>(node_id)].leaf_value = leaf_weight(d, idx, params.lambda);
        return node_id;
    }
    std::vector<int> left_idx, right_idx;
    for (int i : idx) {
        const double v =
            (*d.features)[static_cast<size_t>(i)].values[static_cast<size_t>(split.feature)];
        (v <= split.threshold ? left_idx : right_idx).push_back(i);
    }
    const int left = build_node(tree, d, left_idx, depth + 1, params);
    const int right = build_node(tree, d, right_idx, depth + 1, params);
    auto& node = tree.nodes[static_cast<size_t>(node_id)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = left;
    node.right = right;
    return node_id;
}

GbdtModel fit_gbdt(const std::vector<RouterFeatures>& features, const std::vector<bool>& labels,
                   const std::vector<int>& idx, const GbdtParams& params) {
    GbdtModel model;
    model.learning_rate = params.learning_rate;

    double positives = 0.0;
    for (int i : idx) positives += labels[static_cast<size_t>(i)] ? 1.0 : 0.0;
    const double p0 = std::clamp(positives / static_cast<double>(idx.size()), 1e-6, 1.0 - 1e-6);
    model.base_score = std::log(p0 / (1.0 - p0));

    std::vector<double> raw(features.size(), model.base_score);
    TrainData d;
    d.features = &features;
    d.gradient.resize(features.size());
    d.hessian.resize(features.size());

    for (int round = 0; round < params.n_rounds; ++round) {
        for (int i : idx) {
            const double p = 1.0 / (1.0 + std::exp(-raw[static_cast<size_t>(i)]));
            d.gradient[static_cast<size_t>(i)] = (labels[static_cast<size_t>(i)] ? 1.0 : 0.0) - p;
            d.hessian[static_cast<size_t>(i)] = std::max(p * (1.0 - p), 1e-9);
        }
        Tree tree;
        build_node(tree, d, idx, 0, params);
        for (int i : idx) {
            raw[static_cast<size_t>(i)] +=
                params.learning_rate * tree.predict(features[static_cast<size_t>(i)].values);
        }
        model.trees.push_back(std::move(tree));
    }
    return model;
}

}  // namespace

TrainReport train_router(const std::vector<RouterFeatures>& features,
                         const std::vector<bool>& labels, unsigned seed,
                         const GbdtParams& params) {
    if (features.size() != labels.size()) {
        throw RouterError("features/labels size mismatch");
    }
    if (features.size() < 20) {
        throw RouterError("train_router requires at least 20 labeled examples");
    }
    const long positives = std::count(labels.begin(), labels.end(), true);
    if (positives == 0 || positives == static_cast<long>(labels.size())) {
        throw RouterError("train_router requires both classes present");
    }

    // 5-fold CV accuracy with a seeded shuffle.
    std::vector<int> order(features.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937 rng(seed);
    for (size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[rng() % i]);
    }
    const int folds = 5;
    long correct = 0;
    for (int fold = 0; fold < folds; ++fold) {
        std::vector<int> train_idx, test_idx;
        for (size_t k = 0; k < order.size(); ++k) {
            if (static_cast<int>(k % folds) == fold) {
                test_idx.push_back(order[k]);
            } else {
                train_idx.push_back(order[k]);
            }
        }
        long fold_pos = 0;
        for (int i : train_idx) fold_pos += labels[static_cast<size_t>(i)] ? 1 : 0;
        if (fold_pos == 0 || fold_pos == static_cast<long>(train_idx.size())) {
            // Degenerate fold: predict the majority class.
            const bool majority = fold_pos > 0;
            for (int i : test_idx) {
                if (labels[static_cast<size_t>(i)] == majority) ++correct;
            }
            continue;
        }
        const GbdtModel fold_model = fit_gbdt(features, labels, train_idx, params);
        for (int i : test_idx) {
            const bool pred = fold_model.probability(features[static_cast<size_t>(i)]) >= 0.5;
            if (pred == labels[static_cast<size_t>(i)]) ++correct;
        }
    }

    std::vector<int> all_idx(features.size());
    std::iota(all_idx.begin(), all_idx.end(), 0);
    TrainReport report;
    report.model.kind = RouterModel::Kind::Trained;
    report.model.gbdt = fit_gbdt(features, labels, all_idx, params);
    report.cv_accuracy = static_cast<double>(correct) / static_cast<double>(features.size());
    return report;
}

nlohmann::json router_model_to_json(const RouterModel& model) {
    nlohmann::json j;
    j["format"] = "finrag-router";
    j["version"] = 1;
    j["kind"] = model.kind == RouterModel::Kind::Heuristic ? "heuristic" : "trained";
    if (model.kind == RouterModel::Kind::Trained) {
        j["base_score"] = model.gbdt.base_score;
        j["learning_rate"] = model.gbdt.learning_rate;
        nlohmann::json trees = nlohmann::json::array();
        for (const auto& t : model.gbdt.trees) {
            nlohmann::json nodes = nlohmann::json::array();
            for (const auto& n : t.nodes) {
                nodes.push_back(nlohmann::json{{"feature", n.feature},
                                               {"threshold", n.threshold},
                                               {"left", n.left},
                                               {"right", n.right},
                                               {"leaf_value", n.leaf_value}});
            }
            trees.push_back(std::move(nodes));
        }
        j["trees"] = std::move(trees);
    }
    return j;
}

RouterModel router_model_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "finrag-router") throw RouterError("not a router model file");
    RouterModel model;
    if (j.value("kind", "heuristic") == "heuristic") {
        model.kind = RouterModel::Kind::Heuristic;
        return model;
    }
    model.kind = RouterModel::Kind::Trained;
    model.gbdt.base_score = j.at("base_score").get<double>();
    model.gbdt.learning_rate = j.at("learning_rate").get<double>();
    for (const auto& jt : j.at("trees")) {
        Tree t;
        for (const auto& jn : jt) {
            TreeNode n;
            n.feature = jn.at("feature").get<int>();
            n.threshold = jn.at("threshold").get<double>();
            n.left = jn.at("left").get<int>();
            n.right = jn.at("right").get<int>();
            n.leaf_value = jn.at("leaf_value").get<double>();
            t.nodes.push_back(n);
        }
        model.gbdt.trees.push_back(std::move(t));
    }
    return model;
}

void save_router_model(const RouterModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw RouterError("cannot write router model file: " + path);
    out << router_model_to_json(model).dump(2) << '\n';
}

RouterModel load_router_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw RouterError("cannot open router model file: " + path);
    nlohmann::json j;
    in >> j;
    return router_model_from_json(j);
}

}  // namespace finrag::router
