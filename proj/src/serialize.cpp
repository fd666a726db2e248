#include "hardpatch/serialize.hpp"

#include <stdexcept>

namespace hardpatch {

namespace {

nlohmann::json grid_rows(const Grid& g) {
  nlohmann::json rows = nlohmann::json::array();
  for (int y = 0; y < g.height; ++y) {
    std::string row(g.width, '0');
    for (int x = 0; x < g.width; ++x) {
      if (g.get(x, y)) row[x] = '1';
    }
    rows.push_back(row);
  }
  return rows;
}

Grid grid_from_rows(const nlohmann::json& rows) {
  Grid g;
  g.height = static_cast<int>(rows.size());
  g.width = g.height > 0 ? static_cast<int>(rows[0].get<std::string>().size()) : 0;
  g.v.assign(static_cast<size_t>(g.width) * g.height, 0);
  for (int y = 0; y < g.height; ++y) {
    std::string row = rows[y].get<std::string>();
    if (static_cast<int>(row.size()) != g.width) {
      throw std::invalid_argument("grid: ragged rows");
    }
    for (int x = 0; x < g.width; ++x) g.set(x, y, row[x] == '1');
  }
  return g;
}

}  // namespace

void to_json(nlohmann::json& j, const Grid& g) { j = grid_rows(g); }

void from_json(const nlohmann::json& j, Grid& g) { g = grid_from_rows(j); }

void to_json(nlohmann::json& j, const Mask& m) {
  j = nlohmann::json{{"bits", m.bits}, {"object", m.object}};
}

void from_json(const nlohmann::json& j, Mask& m) {
  m = Mask(j.at("bits").get<Grid>(), j.at("object").get<Grid>());
}

void to_json(nlohmann::json& j, const Perturbation& d) {
  j = nlohmann::json{{"width", d.width},
                     {"height", d.height},
                     {"channels", d.channels},
                     {"delta", d.delta}};
}

void from_json(const nlohmann::json& j, Perturbation& d) {
  d.width = j.at("width").get<int>();
  d.height = j.at("height").get<int>();
  d.channels = j.at("channels").get<int>();
  d.delta = j.at("delta").get<std::vector<float>>();
  if (d.delta.size() != static_cast<size_t>(d.width) * d.height * d.channels) {
    throw std::invalid_argument("perturbation: payload size mismatch");
  }
}

void to_json(nlohmann::json& j, const Image& img) {
  j = nlohmann::json{{"width", img.width},
                     {"height", img.height},
                     {"channels", img.channels},
                     {"data", img.data}};
}

void from_json(const nlohmann::json& j, Image& img) {
  img.width = j.at("width").get<int>();
  img.height = j.at("height").get<int>();
  img.channels = j.at("channels").get<int>();
  img.data = j.at("data").get<std::vector<float>>();
  if (img.data.size() != static_cast<size_t>(img.width) * img.height * img.channels) {
    throw std::invalid_argument("image: payload size mismatch");
  }
}

void to_json(nlohmann::json& j, const SurvivabilityEstimate& e) {
  j = nlohmann::json{{"value", e.value},
                     {"n", e.n},
                     {"seed", e.seed},
                     {"queries_spent", e.queries_spent},
                     {"partial", e.partial}};
}

void from_json(const nlohmann::json& j, SurvivabilityEstimate& e) {
  e.value = j.at("value").get<double>();
  e.n = j.at("n").get<int>();
  e.seed = j.at("seed").get<uint64_t>();
  e.queries_spent = j.at("queries_spent").get<long long>();
  e.partial = j.value("partial", false);
}

}  // namespace hardpatch
