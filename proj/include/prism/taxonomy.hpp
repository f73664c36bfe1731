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

#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace prism {

// The three independently measured layers. The data-selection layer is a
// derived quantity, never a bank layer.
enum class LayerId { L4, L3, L2 };

inline constexpr std::array<LayerId, 3> kAllLayers = {LayerId::L4, LayerId::L3,
                                                      LayerId::L2};

const char* layer_tag(LayerId layer);           // "L4-normative" etc.
const char* layer_short(LayerId layer);         // "L4" etc.
std::optional<LayerId> parse_layer(const std::string& text);

struct TaxonomyItem {
  int index = 0;
  std::string name;
  std::string category;  // higher-order grouping
  std::string stake;     // noun phrase used inside scenario prompts
};

struct Taxonomy {
  LayerId layer = LayerId::L4;
  std::vector<TaxonomyItem> items;

  int size() const { return static_cast<int>(items.size()); }
  const TaxonomyItem& item(int index) const;
  std::optional<int> index_of(const std::string& name) const;
};

// Unordered pair in canonical (lo < hi) form.
struct ItemPair {
  LayerId layer = LayerId::L4;
  int lo = 0;
  int hi = 1;

  friend bool operator==(const ItemPair&, const ItemPair&) = default;
  friend auto operator<=>(const ItemPair&, const ItemPair&) = default;
};

std::string pair_key(const ItemPair& pair);  // "lo-hi"

struct Domain {
  int index = 0;
  std::string name;

  friend bool operator==(const Domain&, const Domain&) = default;
};

// All unordered pairs in canonical lexicographic order: (0,1),(0,2),...
// Works for any taxonomy of >= 2 items; layer banks additionally require
// exactly 10 items (validate_layer_taxonomy).
std::vector<ItemPair> enumerate_pairs(const Taxonomy& taxonomy);

// Throws taxonomy-error unless the taxonomy has exactly 10 items with
// distinct indices 0..9. For the normative layer the names must be the
// Schwartz ten.
void validate_layer_taxonomy(const Taxonomy& taxonomy);

struct TaxonomySet {
  std::map<LayerId, Taxonomy> layers;

  const Taxonomy& layer(LayerId id) const;
  bool has(LayerId id) const { return layers.count(id) > 0; }
};

// Loads a taxonomy data file (JSON; see data/taxonomies.json) and validates
// every layer present in it.
TaxonomySet load_taxonomies(const std::string& path);

// Resolution order for shipped data files: explicit path, $PRISM_DATA_DIR,
// compile-time default.
std::string default_data_dir();
std::string resolve_data_file(const std::string& explicit_path,
                              const std::string& filename);

}  // namespace prism
