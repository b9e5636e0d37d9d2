#include "finrag/calibration.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace finrag::calibration {

CalibrationModel fit_calibration(const std::vector<std::pair<double, bool>>& pairs) {
    CalibrationModel model;
    if (pairs.size() < 2) return model;  // identity

    std::vector<std::pair<double, double>> sorted;
    sorted.reserve(pairs.size());
    for (const auto& [raw, correct] : pairs) {
        sorted.emplace_back(raw, correct ? 1.0 : 0.0);
    }
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });

    struct Block {
        double sum;
        double count;
        double min_raw;
    };
    std::vector<Block> blocks;
    blocks.reserve(sorted.size());
    for (const auto& [raw, y] : sorted) {
        blocks.push_back({y, 1.0, raw});
        // Pool while the previous block's mean exceeds the new one's.
        while (blocks.size() >= 2) {
            auto& prev = blocks[blocks.size() - 2];
            auto& last = blocks.back();
            if (prev.sum / prev.count <= last.sum / last.count) break;
            prev.sum += last.sum;
            prev.count += last.count;
            blocks.pop_back();
        }
    }
    for (const auto& b : blocks) {
        model.steps.emplace_back(b.min_raw, b.sum / b.count);
    }
    // Identical raw thresholds collapse to the last (pooled) value.
    model.steps.erase(std::unique(model.steps.begin(), model.steps.end(),
                                  [](const auto& a, const auto& b) { return a.first == b.first; }),
                      model.steps.end());
    return model;
}

double apply_calibration(const CalibrationModel& model, double raw) {
    if (model.is_identity()) {
        return std::clamp(raw, 0.0, 1.0);
    }
    if (raw <= model.steps.front().first) return model.steps.front().second;
    double value = model.steps.front().second;
    for (const auto& [threshold, v] : model.steps) {
        if (threshold <= raw) {
            value = v;
        } else {
            break;
        }
    }
    return value;
}

nlohmann::json calibration_to_json(const CalibrationModel& model) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& [t, v] : model.steps) {
        steps.push_back(nlohmann::json::array({t, v}));
    }
    return nlohmann::json{{"format", "finrag-calibration"}, {"version", 1}, {"steps", steps}};
}

CalibrationModel calibration_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "finrag-calibration") {
        throw std::runtime_error("not a calibration file");
    }
    CalibrationModel model;
    for (const auto& s : j.at("steps")) {
        model.steps.emplace_back(s.at(0).get<double>(), s.at(1).get<double>());
    }
    return model;
}

void save_calibration(const CalibrationModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write calibration file: " + path);
    out << calibration_to_json(model).dump(2) << '\n';
}

CalibrationModel load_calibration(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open calibration file: " + path);
    nlohmann::json j;
    in >> j;
    return calibration_from_json(j);
}

}  // namespace finrag::calibration
