#include "fairpoison/csv_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace fairpoison {

namespace {

using OrderedJson = nlohmann::ordered_json;

std::vector<std::string> parse_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

double parse_double(const std::string& text, const char* what, std::size_t row) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end)
    throw DataError(std::string("csv: non-numeric ") + what + " '" + text +
                    "' at data row " + std::to_string(row));
  return value;
}

int parse_binary(const std::string& text, const std::map<std::string, int>& map,
                 const char* what, std::size_t row) {
  if (!map.empty()) {
    const auto it = map.find(text);
    if (it == map.end())
      throw DataError(std::string("csv: invalid ") + what + " '" + text +
                      "' (not in schema map) at data row " + std::to_string(row));
    if (it->second != 0 && it->second != 1)
      throw DataError(std::string("csv: schema maps ") + what +
                      " to a value outside {0,1}");
    return it->second;
  }
  if (text == "0") return 0;
  if (text == "1") return 1;
  throw DataError(std::string("csv: invalid ") + what + " '" + text +
                  "' at data row " + std::to_string(row));
}

}  // namespace

CsvSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("schema: cannot open " + path);
  OrderedJson doc;
  try {
    doc = OrderedJson::parse(in);
  } catch (const std::exception& e) {
    throw ConfigError("schema: parse error in " + path + ": " + e.what());
  }

  static const std::set<std::string> known = {
      "label_col", "group_col",  "feature_cols",     "categorical",
      "label_map", "group_map", "group_in_features"};
  for (const auto& item : doc.items())
    if (!known.count(item.key()))
      throw ConfigError("schema: unknown key '" + item.key() + "'");

  CsvSchema schema;
  if (!doc.contains("label_col") || !doc.contains("group_col"))
    throw ConfigError("schema: label_col and group_col are required");
  schema.label_col = doc.at("label_col").get<std::string>();
  schema.group_col = doc.at("group_col").get<std::string>();
  if (doc.contains("feature_cols"))
    schema.feature_cols =
        doc.at("feature_cols").get<std::vector<std::string>>();
  if (doc.contains("categorical"))
    schema.categorical = doc.at("categorical").get<std::vector<std::string>>();
  if (doc.contains("label_map"))
    schema.label_map = doc.at("label_map").get<std::map<std::string, int>>();
  if (doc.contains("group_map"))
    schema.group_map = doc.at("group_map").get<std::map<std::string, int>>();
  if (doc.contains("group_in_features"))
    schema.group_in_features = doc.at("group_in_features").get<bool>();
  return schema;
}

Dataset load_dataset(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("csv: cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw DataError("csv: missing header in " + path);
  const std::vector<std::string> header = parse_csv_line(line);

  const auto column_of = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw DataError("csv: unknown column '" + name + "' in " + path);
    return static_cast<std::size_t>(it - header.begin());
  };

  const std::size_t label_idx = column_of(schema.label_col);
  const std::size_t group_idx = column_of(schema.group_col);

  std::vector<std::string> feature_cols = schema.feature_cols;
  if (feature_cols.empty()) {
    for (const std::string& name : header)
      if (name != schema.label_col && name != schema.group_col)
        feature_cols.push_back(name);
  }
  std::vector<std::size_t> feature_idx;
  for (const std::string& name : feature_cols) {
    if (name == schema.label_col || name == schema.group_col)
      throw ConfigError("schema: feature_cols must not repeat the label or "
                        "group column; use group_in_features instead");
    feature_idx.push_back(column_of(name));
  }

  std::vector<bool> is_categorical(feature_cols.size(), false);
  for (const std::string& name : schema.categorical) {
    const auto it = std::find(feature_cols.begin(), feature_cols.end(), name);
    if (it == feature_cols.end())
      throw ConfigError("schema: categorical column '" + name +
                        "' is not a feature column");
    is_categorical[static_cast<std::size_t>(it - feature_cols.begin())] = true;
  }

  // First pass: keep raw rows that survive row rejection.
  std::vector<std::vector<std::string>> rows;
  std::size_t row_number = 0;
  while (std::getline(in, line)) {
    ++row_number;
    if (line.empty()) continue;
    std::vector<std::string> fields = parse_csv_line(line);
    if (fields.size() != header.size())
      throw DataError("csv: row " + std::to_string(row_number) + " has " +
                      std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(header.size()));
    bool missing = fields[label_idx].empty() || fields[group_idx].empty();
    for (std::size_t j : feature_idx) missing = missing || fields[j].empty();
    if (missing) continue;  // row rejection for missing values
    rows.push_back(std::move(fields));
  }
  if (rows.empty()) throw DataError("csv: no usable data rows in " + path);

  // Category universes, sorted for a deterministic column order.
  std::vector<std::vector<std::string>> categories(feature_cols.size());
  for (std::size_t c = 0; c < feature_cols.size(); ++c) {
    if (!is_categorical[c]) continue;
    std::set<std::string> values;
    for (const auto& fields : rows) values.insert(fields[feature_idx[c]]);
    categories[c].assign(values.begin(), values.end());
  }

  std::vector<std::string> names;
  Index dim = 0;
  for (std::size_t c = 0; c < feature_cols.size(); ++c) {
    if (is_categorical[c]) {
      for (const std::string& v : categories[c])
        names.push_back(feature_cols[c] + "=" + v);
      dim += static_cast<Index>(categories[c].size());
    } else {
      names.push_back(feature_cols[c]);
      ++dim;
    }
  }
  if (schema.group_in_features) {
    names.push_back(schema.group_col);
    ++dim;
  }
  if (dim == 0) throw ConfigError("schema: no feature columns");

  Matrix features(static_cast<Index>(rows.size()), dim);
  IntVector labels(static_cast<Index>(rows.size()));
  IntVector groups(static_cast<Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& fields = rows[r];
    labels[static_cast<Index>(r)] =
        parse_binary(fields[label_idx], schema.label_map, "label", r + 1);
    const int group =
        parse_binary(fields[group_idx], schema.group_map, "group", r + 1);
    groups[static_cast<Index>(r)] = group;

    Index j = 0;
    for (std::size_t c = 0; c < feature_cols.size(); ++c) {
      const std::string& cell = fields[feature_idx[c]];
      if (is_categorical[c]) {
        for (const std::string& v : categories[c])
          features(static_cast<Index>(r), j++) = (cell == v) ? 1.0 : 0.0;
      } else {
        features(static_cast<Index>(r), j++) =
            parse_double(cell, "feature", r + 1);
      }
    }
    if (schema.group_in_features)
      features(static_cast<Index>(r), j++) = static_cast<double>(group);
  }

  Dataset data(std::move(features), std::move(labels), std::move(groups), path);
  data.set_feature_names(std::move(names));
  return data;
}

namespace {

void write_rows(std::ofstream& out, const Dataset& data,
                const std::vector<bool>* flipped) {
  const auto& names = data.feature_names();
  for (Index j = 0; j < data.dim(); ++j)
    out << names[static_cast<std::size_t>(j)] << ',';
  out << "label,group";
  if (flipped) out << ",flipped";
  out << '\n';
  for (Index i = 0; i < data.size(); ++i) {
    for (Index j = 0; j < data.dim(); ++j)
      out << format_double(data.features()(i, j)) << ',';
    out << data.label(i) << ',' << data.group(i);
    if (flipped) out << ',' << ((*flipped)[static_cast<std::size_t>(i)] ? 1 : 0);
    out << '\n';
  }
}

}  // namespace

void save_dataset_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("csv: cannot write " + path);
  write_rows(out, data, nullptr);
}

void save_poison_csv(const Dataset& data, const std::vector<bool>& flipped,
                     const std::string& path) {
  if (static_cast<Index>(flipped.size()) != data.size())
    throw DataError("csv: flipped flag count does not match dataset size");
  std::ofstream out(path);
  if (!out) throw DataError("csv: cannot write " + path);
  write_rows(out, data, &flipped);
}

Dataset load_dataset_csv(const std::string& path, const std::string& name) {
  CsvSchema schema;
  schema.label_col = "label";
  schema.group_col = "group";
  Dataset data = load_dataset(path, schema);
  data.set_name(name.empty() ? path : name);
  return data;
}

namespace {

OrderedJson subgroup_table(const Dataset& data) {
  OrderedJson table;
  const SubgroupStats stats = SubgroupStats::counts_of(data);
  for (int y = 0; y < 2; ++y)
    for (int s = 0; s < 2; ++s) {
      const std::string key =
          "y" + std::to_string(y) + "s" + std::to_string(s);
      table["count"][key] = stats.count[y][s];
      table["fraction"][key] =
          data.empty() ? 0.0
                       : static_cast<double>(stats.count[y][s]) /
                             static_cast<double>(data.size());
    }
  return table;
}

}  // namespace

void write_split_manifest(const DataSplits& splits, std::uint64_t seed,
                          const std::array<double, 3>& ratios,
                          double keep_fraction, const std::string& path) {
  OrderedJson doc;
  doc["seed"] = seed;
  doc["ratios"] = ratios;
  doc["keep_fraction"] = keep_fraction;
  doc["sizes"]["clean"] = splits.clean.size();
  doc["sizes"]["test"] = splits.test.size();
  doc["sizes"]["attack"] = splits.attack.size();
  doc["sizes"]["hard"] = splits.hard.size();
  doc["subgroups"]["clean"] = subgroup_table(splits.clean);
  doc["subgroups"]["test"] = subgroup_table(splits.test);
  doc["subgroups"]["attack"] = subgroup_table(splits.attack);
  if (!splits.hard.empty())
    doc["subgroups"]["hard"] = subgroup_table(splits.hard);

  std::ofstream out(path);
  if (!out) throw DataError("manifest: cannot write " + path);
  out << doc.dump(2) << '\n';
}

}  // namespace fairpoison
