#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace finrag::calibration {

/// Monotone step function fit by pool-adjacent-violators: sorted
/// (raw_threshold, calibrated_value) pairs with non-decreasing values.
struct CalibrationModel {
    std::vector<std::pair<double, double>> steps;  // empty = identity

    bool is_identity() const { return steps.empty(); }
};

/// Isotonic regression over (raw confidence, correctness) pairs. Fewer than
/// two pairs yield the identity model.
CalibrationModel fit_calibration(const std::vector<std::pair<double, bool>>& pairs);

/// Value of the step at the largest threshold <= raw, clamped at the ends;
/// identity model returns raw clamped to [0, 1].
double apply_calibration(const CalibrationModel& model, double raw);

nlohmann::json calibration_to_json(const CalibrationModel& model);
CalibrationModel calibration_from_json(const nlohmann::json& j);
void save_calibration(const CalibrationModel& model, const std::string& path);
CalibrationModel load_calibration(const std::string& path);

}  // namespace finrag::calibration
