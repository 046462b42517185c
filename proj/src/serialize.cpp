#include "fairpoison/serialize.hpp"

#include <fstream>

#include <json.hpp>

namespace fairpoison {

namespace {

using OrderedJson = nlohmann::ordered_json;

std::vector<double> weights_to_vector(const LinearModel& model) {
  return {model.weights.data(), model.weights.data() + model.weights.size()};
}

LinearModel weights_from_vector(const std::vector<double>& values) {
  if (values.size() < 2)
    throw DataError("model: weights need at least one feature plus bias");
  LinearModel model;
  model.weights = Eigen::Map<const Vector>(values.data(),
                                           static_cast<Index>(values.size()));
  return model;
}

OrderedJson to_json(const FairClassifier& fc) {
  OrderedJson doc;
  switch (fc.kind()) {
    case FairClassifier::Kind::Deterministic:
      doc["kind"] = "deterministic";
      doc["weights"] = weights_to_vector(fc.base());
      break;
    case FairClassifier::Kind::Mixture: {
      doc["kind"] = "mixture";
      doc["components"] = OrderedJson::array();
      for (const MixtureComponent& c : fc.components()) {
        OrderedJson comp;
        comp["weight"] = c.weight;
        comp["weights"] = weights_to_vector(c.model);
        doc["components"].push_back(std::move(comp));
      }
      break;
    }
    case FairClassifier::Kind::Postprocessed: {
      doc["kind"] = "postprocessed";
      doc["weights"] = weights_to_vector(fc.base());
      doc["flips"]["s0"] = {fc.flips()[0][0], fc.flips()[0][1]};
      doc["flips"]["s1"] = {fc.flips()[1][0], fc.flips()[1][1]};
      break;
    }
  }
  return doc;
}

FairClassifier from_json(const OrderedJson& doc) {
  const std::string kind = doc.at("kind").get<std::string>();
  if (kind == "deterministic") {
    return FairClassifier::deterministic(
        weights_from_vector(doc.at("weights").get<std::vector<double>>()));
  }
  if (kind == "mixture") {
    std::vector<MixtureComponent> components;
    for (const OrderedJson& comp : doc.at("components"))
      components.push_back(
          {weights_from_vector(comp.at("weights").get<std::vector<double>>()),
           comp.at("weight").get<double>()});
    return FairClassifier::mixture(std::move(components));
  }
  if (kind == "postprocessed") {
    FlipTable flips;
    const auto s0 = doc.at("flips").at("s0").get<std::vector<double>>();
    const auto s1 = doc.at("flips").at("s1").get<std::vector<double>>();
    if (s0.size() != 2 || s1.size() != 2)
      throw DataError("model: flip table needs two entries per group");
    flips[0] = {s0[0], s0[1]};
    flips[1] = {s1[0], s1[1]};
    return FairClassifier::postprocessed(
        weights_from_vector(doc.at("weights").get<std::vector<double>>()),
        flips);
  }
  throw DataError("model: unknown kind '" + kind + "'");
}

}  // namespace

std::string model_to_json_string(const FairClassifier& classifier) {
  return to_json(classifier).dump(2);
}

FairClassifier model_from_json_string(const std::string& text) {
  try {
    return from_json(OrderedJson::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model: parse error: ") + e.what());
  }
}

void save_model_json(const FairClassifier& classifier,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("model: cannot write " + path);
  out << model_to_json_string(classifier) << '\n';
}

FairClassifier load_model_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("model: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return model_from_json_string(text);
}

}  // namespace fairpoison
