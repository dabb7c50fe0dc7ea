#pragma once

#include "nkdb/classifiers.hpp"

#include <filesystem>
#include <string>

namespace nkdb {

inline constexpr int kModelFormatVersion = 1;

/// Versioned JSON text of a trained model.
std::string model_to_json(const TrainedModel& model);
/// Throws ModelFormatError on a wrong magic/version or malformed content.
TrainedModel model_from_json(const std::string& text);

void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace nkdb
