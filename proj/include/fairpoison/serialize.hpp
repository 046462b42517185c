#pragma once

#include <string>

#include "fairpoison/fair_classifier.hpp"

namespace fairpoison {

/// Flat JSON record {kind, weights or components, flips}; field order is
/// stable for golden comparisons.
void save_model_json(const FairClassifier& classifier, const std::string& path);
FairClassifier load_model_json(const std::string& path);

std::string model_to_json_string(const FairClassifier& classifier);
FairClassifier model_from_json_string(const std::string& text);

}  // namespace fairpoison
