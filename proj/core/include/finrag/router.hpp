#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "finrag/mining.hpp"
#include "finrag/reason.hpp"

namespace finrag::router {

class RouterError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Fixed 12-dimensional feature layout:
///   syntactic (4): token_length, has_comparative, n_financial_entities,
///                  n_numbers_in_question
///   decomposition (2): n_subquestions, max_decomposition_depth
///   temporal (3): n_distinct_periods, has_yoy_pattern, temporal_span_years
///   computation one-hot (3): is_lookup, is_single_step, is_multi_step
struct RouterFeatures {
    static constexpr int kDim = 12;
    std::array<double, kDim> values{};

    double token_length() const { return values[0]; }
    double has_comparative() const { return values[1]; }
    double n_financial_entities() const { return values[2]; }
    double n_numbers_in_question() const { return values[3]; }
    double n_subquestions() const { return values[4]; }
    double max_decomposition_depth() const { return values[5]; }
    double n_distinct_periods() const { return values[6]; }
    double has_yoy_pattern() const { return values[7]; }
    double temporal_span_years() const { return values[8]; }
    double is_lookup() const { return values[9]; }
    double is_single_step() const { return values[10]; }
    double is_multi_step() const { return values[11]; }
};

enum class Route { Simple, Complex };

std::string to_string(Route r);

struct RouteDecision {
    Route route = Route::Simple;
    double score = 0.0;  // complex-class probability (heuristic: 0 or 1)
};

RouterFeatures extract_features(const std::string& question,
                                const std::vector<reason::SubQuestion>& decomposition,
                                const mining::Lexicon& lexicon,
                                const std::vector<std::string>& company_names = {});

// ---------------------------------------------------------------------------
// Gradient-boosted shallow trees, built from scratch for the 12-dim space.
// ---------------------------------------------------------------------------

struct TreeNode {
    int feature = -1;        // -1 marks a leaf
    double threshold = 0.0;  // go left when x[feature] <= threshold
    int left = -1;
    int right = -1;
    double leaf_value = 0.0;
};

struct Tree {
    std::vector<TreeNode> nodes;
    double predict(const std::array<double, RouterFeatures::kDim>& x) const;
};

struct GbdtModel {
    double base_score = 0.0;  // prior log-odds
    double learning_rate = 0.1;
    std::vector<Tree> trees;

    double raw_score(const RouterFeatures& f) const;
    double probability(const RouterFeatures& f) const;
};

struct GbdtParams {
    int n_rounds = 50;
    int max_depth = 4;
    double learning_rate = 0.1;
    int min_leaf = 2;
    double lambda = 1.0;  // L2 on leaf weights
};

/// Heuristic by default; a trained tree ensemble when loaded or trained.
struct RouterModel {
    enum class Kind { Heuristic, Trained };
    Kind kind = Kind::Heuristic;
    GbdtModel gbdt;
};

/// Heuristic rule: complex iff is_multi_step, or >= 2 distinct periods, or
/// >= 3 sub-questions. Trained models threshold the ensemble probability
/// at 0.5.
RouteDecision route(const RouterFeatures& features, const RouterModel& model = {});

/// complex where the full loop answered correctly and the single pass did
/// not; simple otherwise. Result sets must cover the same question ids.
std::vector<bool> derive_labels(const std::vector<std::string>& question_ids,
                                const std::map<std::string, bool>& single_pass_correct,
                                const std::map<std::string, bool>& full_loop_correct);

struct TrainReport {
    RouterModel model;
    double cv_accuracy = 0.0;  // 5-fold
};

/// Logistic-loss Newton boosting (50 rounds, depth 4, lr 0.1) trained from
/// scratch; deterministic for a fixed seed. Requires both classes present
/// and at least 20 examples.
TrainReport train_router(const std::vector<RouterFeatures>& features,
                         const std::vector<bool>& labels, unsigned seed = 42,
                         const GbdtParams& params = {});

nlohmann::json router_model_to_json(const RouterModel& model);
RouterModel router_model_from_json(const nlohmann::json& j);
void save_router_model(const RouterModel& model, const std::string& path);
RouterModel load_router_model(const std::string& path);

}  // namespace finrag::router
