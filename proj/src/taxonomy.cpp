// Copyright 2026 The Prism Audit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "prism/taxonomy.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "prism/errors.hpp"
#include "prism/hash.hpp"

#ifndef PRISM_DEFAULT_DATA_DIR
#define PRISM_DEFAULT_DATA_DIR ""
#endif

namespace prism {

using nlohmann::json;

std::string hex16(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(value));
  return std::string(buf);
}

const char* layer_tag(LayerId layer) {
  switch (layer) {
    case LayerId::L4: return "L4-normative";
    case LayerId::L3: return "L3-epistemic";
    case LayerId::L2: return "L2-source";
  }
  return "L4-normative";
}

const char* layer_short(LayerId layer) {
  switch (layer) {
    case LayerId::L4: return "L4";
    case LayerId::L3: return "L3";
    case LayerId::L2: return "L2";
  }
  return "L4";
}

std::optional<LayerId> parse_layer(const std::string& text) {
  if (text == "L4" || text == "L4-normative") return LayerId::L4;
  if (text == "L3" || text == "L3-epistemic") return LayerId::L3;
  if (text == "L2" || text == "L2-source") return LayerId::L2;
  return std::nullopt;
}

const TaxonomyItem& Taxonomy::item(int index) const {
  for (const auto& it : items) {
    if (it.index == index) return it;
  }
  raise(ErrorKind::Data, "no item with index " + std::to_string(index) +
                             " in layer " + layer_tag(layer));
}

std::optional<int> Taxonomy::index_of(const std::string& name) const {
  for (const auto& it : items) {
    if (it.name == name) return it.index;
  }
  return std::nullopt;
}

std::string pair_key(const ItemPair& pair) {
  return std::to_string(pair.lo) + "-" + std::to_string(pair.hi);
}

std::vector<ItemPair> enumerate_pairs(const Taxonomy& taxonomy) {
  const int n = taxonomy.size();
  if (n < 2) {
    raise(ErrorKind::Taxonomy,
          "taxonomy needs at least 2 items, has " + std::to_string(n));
  }
  std::set<int> seen;
  for (const auto& it : taxonomy.items) {
    if (!seen.insert(it.index).second) {
      raise(ErrorKind::Taxonomy,
            "duplicate item index " + std::to_string(it.index));
    }
    if (it.index < 0 || it.index >= n) {
      raise(ErrorKind::Taxonomy,
            "item index " + std::to_string(it.index) + " outside 0.." +
                std::to_string(n - 1));
    }
  }
  std::vector<ItemPair> pairs;
  pairs.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (int lo = 0; lo < n; ++lo) {
    for (int hi = lo + 1; hi < n; ++hi) {
      pairs.push_back(ItemPair{taxonomy.layer, lo, hi});
    }
  }
  return pairs;
}

namespace {

const std::set<std::string> kSchwartzTen = {
    "universalism", "benevolence", "conformity",  "tradition",
    "security",     "power",       "achievement", "hedonism",
    "stimulation",  "self-direction"};

}  // namespace

void validate_layer_taxonomy(const Taxonomy& taxonomy) {
  if (taxonomy.size() != 10) {
    raise(ErrorKind::Taxonomy,
          std::string(layer_tag(taxonomy.layer)) + " must have 10 items, has " +
              std::to_string(taxonomy.size()));
  }
  enumerate_pairs(taxonomy);  // index validity + distinctness
  if (taxonomy.layer == LayerId::L4) {
    std::set<std::string> names;
    for (const auto& it : taxonomy.items) names.insert(it.name);
    if (names != kSchwartzTen) {
      raise(ErrorKind::Taxonomy,
            "L4 item names must be the ten basic values");
    }
    std::set<std::string> categories;
    for (const auto& it : taxonomy.items) categories.insert(it.category);
    if (categories.size() != 4) {
      raise(ErrorKind::Taxonomy,
            "L4 must use exactly 4 higher-order categories, found " +
                std::to_string(categories.size()));
    }
  }
  for (const auto& it : taxonomy.items) {
    if (it.name.empty()) raise(ErrorKind::Taxonomy, "item with empty name");
    if (it.stake.empty()) {
      raise(ErrorKind::Taxonomy, "item '" + it.name + "' missing stake text");
    }
  }
}

const Taxonomy& TaxonomySet::layer(LayerId id) const {
  auto found = layers.find(id);
  if (found == layers.end()) {
    raise(ErrorKind::Config,
          std::string("no taxonomy loaded for ") + layer_tag(id));
  }
  return found->second;
}

TaxonomySet load_taxonomies(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::Io, "cannot open taxonomy file " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    raise(ErrorKind::Config, "taxonomy file " + path + ": " + e.what());
  }
  if (doc.value("format_version", "") != "prism/1") {
    raise(ErrorKind::Config,
          "taxonomy file " + path + " has unsupported format_version");
  }
  TaxonomySet result;
  for (const auto& [key, body] : doc.at("layers").items()) {
    auto layer = parse_layer(key);
    if (!layer) raise(ErrorKind::Config, "unknown layer key '" + key + "'");
    Taxonomy tax;
    tax.layer = *layer;
    for (const auto& item : body.at("items")) {
      TaxonomyItem ti;
      ti.index = item.at("index").get<int>();
      ti.name = item.at("name").get<std::string>();
      ti.category = item.value("category", "");
      ti.stake = item.value("stake", "");
      tax.items.push_back(std::move(ti));
    }
    std::sort(tax.items.begin(), tax.items.end(),
              [](const auto& a, const auto& b) { return a.index < b.index; });
    validate_layer_taxonomy(tax);
    result.layers[*layer] = std::move(tax);
  }
  return result;
}

std::string default_data_dir() {
  if (const char* env = std::getenv("PRISM_DATA_DIR"); env && *env) {
    return env;
  }
  return PRISM_DEFAULT_DATA_DIR;
}

std::string resolve_data_file(const std::string& explicit_path,
                              const std::string& filename) {
  if (!explicit_path.empty()) return explicit_path;
  std::string dir = default_data_dir();
  if (dir.empty()) {
    raise(ErrorKind::Config,
          "no path given for " + filename +
              " and PRISM_DATA_DIR is not set");
  }
  return (std::filesystem::path(dir) / filename).string();
}

}  // namespace prism
