#pragma once

// Network documents (JSON):
//
//   {
//     "cpts": [ { "child": "B", "parents": ["A"], "table": [[0.9, 0.1], [0.2, 0.8]] } ],
//     "format": "cvbn-network",
//     "name": "toy",
//     "variables": [ { "id": "A", "name": "A", "states": ["low", "high"] } ],
//     "version": 1
//   }
//
// "table" holds one inner array per parent-state combination, enumerated
// row-major over "parents" (first parent slowest). Keys are written sorted and
// numbers in shortest round-trip form, so load -> save is byte-stable.

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "cvbn/bn.hpp"

namespace cvbn {

inline constexpr int kNetworkFormatVersion = 1;

inline nlohmann::json to_json(const BayesNet& net) {
  nlohmann::json doc;
  doc["format"] = "cvbn-network";
  doc["version"] = kNetworkFormatVersion;
  doc["name"] = net.name();
  auto& vars = doc["variables"] = nlohmann::json::array();
  for (const auto& v : net.variables())
    vars.push_back({{"id", v.id}, {"name", v.name}, {"states", v.states}});
  auto& cpts = doc["cpts"] = nlohmann::json::array();
  for (std::size_t i = 0; i < net.size(); ++i) {
    const Cpt c = net.cpt(i);
    const std::size_t card = net.cardinality(i);
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r * card < c.table.size(); ++r)
      rows.push_back(std::vector<double>(c.table.begin() + static_cast<long>(r * card),
                                         c.table.begin() + static_cast<long>((r + 1) * card)));
    cpts.push_back({{"child", c.child}, {"parents", c.parents}, {"table", rows}});
  }
  return doc;
}

inline BayesNet network_from_json(const nlohmann::json& doc) {
  try {
    if (doc.value("format", "") != "cvbn-network")
      throw Error(ErrorKind::ParseError, "not a cvbn-network document");
    if (doc.value("version", 0) != kNetworkFormatVersion)
      throw Error(ErrorKind::ParseError, "unsupported network version");
    std::vector<Variable> vars;
    for (const auto& v : doc.at("variables"))
      vars.push_back({v.at("id").get<std::string>(), v.value("name", std::string{}),
                      v.at("states").get<std::vector<std::string>>()});
    std::vector<Cpt> cpts;
    for (const auto& c : doc.at("cpts")) {
      Cpt cpt;
      cpt.child = c.at("child").get<std::string>();
      cpt.parents = c.at("parents").get<std::vector<std::string>>();
      for (const auto& row : c.at("table"))
        for (const auto& p : row) cpt.table.push_back(p.get<double>());
      cpts.push_back(std::move(cpt));
    }
    BayesNet net = build_network(std::move(vars), std::move(cpts));
    net.set_name(doc.value("name", std::string{}));
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
}

inline std::string save_network(const BayesNet& net) { return to_json(net).dump(2) + "\n"; }

inline BayesNet load_network(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
  return network_from_json(doc);
}

inline BayesNet load_network_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ParseError, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_network(ss.str());
}

inline void save_network_file(const BayesNet& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::ParseError, "cannot write " + path);
  out << save_network(net);
}

}  // namespace cvbn
