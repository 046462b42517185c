#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fairpoison/common.hpp"
#include "fairpoison/dataset.hpp"

namespace fairpoison {

/// Column mapping for CSV ingestion. `feature_cols` empty means "all columns
/// except the label and group columns". Columns named in `categorical` are
/// one-hot encoded (one indicator per distinct value, values sorted).
/// `label_map`/`group_map` translate raw cell text to {0,1}; when absent the
/// cell must already read as 0 or 1. With `group_in_features` the mapped
/// group value is appended as the last feature column, mirroring datasets
/// where the sensitive attribute is part of the feature vector.
struct CsvSchema {
  std::string label_col;
  std::string group_col;
  std::vector<std::string> feature_cols;
  std::vector<std::string> categorical;
  std::map<std::string, int> label_map;
  std::map<std::string, int> group_map;
  bool group_in_features = false;
};

/// Parses a schema JSON file. Unknown keys are rejected.
CsvSchema load_schema(const std::string& path);

/// Loads a UTF-8, comma-separated, header-row CSV through a schema.
/// Rows with an empty cell in any used column are dropped (row rejection);
/// any other malformed content is an error.
Dataset load_dataset(const std::string& path, const CsvSchema& schema);

/// Writes features + label + group columns; the inverse of the plain
/// (non-categorical, group-separate) schema.
void save_dataset_csv(const Dataset& data, const std::string& path);

/// Dataset CSV plus a trailing `flipped` column (adversarial-labeling marker).
void save_poison_csv(const Dataset& data, const std::vector<bool>& flipped,
                     const std::string& path);

/// Reads back the plain dataset CSV written by save_dataset_csv.
Dataset load_dataset_csv(const std::string& path, const std::string& name = {});

/// Reproducibility record written next to prepared splits: seed, ratios,
/// realized sizes, and the per-(y,s) subgroup tables of each part.
void write_split_manifest(const DataSplits& splits, std::uint64_t seed,
                          const std::array<double, 3>& ratios,
                          double keep_fraction, const std::string& path);

}  // namespace fairpoison
