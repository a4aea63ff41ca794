#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "comm_arena/diffnet.hpp"
#include "comm_arena/error.hpp"

namespace comm_arena::diffnet {

using nlohmann::json;

std::string to_checkpoint_json(const DenseNet& net) {
  json root = json::object();
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    const auto& layer = net.layer(k);
    json weights = json::array();
    for (Eigen::Index r = 0; r < layer.out(); ++r) {
      for (Eigen::Index c = 0; c < layer.in(); ++c) {
        weights.push_back(layer.weights(r, c));
      }
    }
    json bias = json::array();
    for (Eigen::Index r = 0; r < layer.out(); ++r) bias.push_back(layer.bias(r));
    root[std::to_string(k)] = {{"weights", std::move(weights)},
                               {"bias", std::move(bias)},
                               {"activation", std::string(to_string(layer.activation))}};
  }
  return root.dump();
}

DenseNet from_checkpoint_json(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidInput(std::string("checkpoint: ") + e.what());
  }
  if (!root.is_object() || root.empty()) {
    throw InvalidInput("checkpoint: expected a non-empty object of layers");
  }
  std::vector<DenseLayer> layers(root.size());
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto key = std::to_string(k);
    if (!root.contains(key)) {
      throw InvalidInput("checkpoint: missing layer index " + key);
    }
    const auto& entry = root.at(key);
    try {
      const auto weights = entry.at("weights").get<std::vector<double>>();
      const auto bias = entry.at("bias").get<std::vector<double>>();
      if (bias.empty() || weights.size() % bias.size() != 0) {
        throw InvalidInput("checkpoint: layer " + key +
                           " weight count is not a multiple of bias length");
      }
      const auto rows = static_cast<Eigen::Index>(bias.size());
      const auto cols = static_cast<Eigen::Index>(weights.size() / bias.size());
      DenseLayer layer;
      layer.weights.resize(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
          layer.weights(r, c) = weights[static_cast<std::size_t>(r * cols + c)];
        }
      }
      layer.bias = Eigen::Map<const Vector>(bias.data(), rows);
      layer.activation = activation_from_string(entry.at("activation").get<std::string>());
      layers[k] = std::move(layer);
    } catch (const json::exception& e) {
      throw InvalidInput("checkpoint: layer " + key + ": " + e.what());
    }
  }
  return DenseNet(std::move(layers));
}

void save_checkpoint(const DenseNet& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_checkpoint_json(net) << '\n';
}

DenseNet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read checkpoint " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_checkpoint_json(buffer.str());
}

}  // namespace comm_arena::diffnet
