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

#include "prism/bank.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "prism/errors.hpp"
#include "prism/hash.hpp"

namespace prism {

namespace fs = std::filesystem;
using nlohmann::json;

TemplateSet load_templates(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::Io, "cannot open template file " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    raise(ErrorKind::Config, "template file " + path + ": " + e.what());
  }
  if (doc.value("format_version", "") != kFormatVersion) {
    raise(ErrorKind::Config,
          "template file " + path + " has unsupported format_version");
  }
  TemplateSet t;
  t.directive = doc.at("directive").get<std::string>();
  for (const auto& p : doc.at("perspectives")) {
    t.perspectives.push_back(p.get<std::string>());
  }
  for (const auto& [name, setting] : doc.at("settings").items()) {
    t.settings[name] = setting.get<std::string>();
  }
  for (const auto& f : doc.at("frames")) {
    t.frames.push_back(f.get<std::string>());
  }
  if (t.perspectives.empty() || t.frames.empty()) {
    raise(ErrorKind::Config, "template file needs perspectives and frames");
  }
  return t;
}

bool assign_option_sides(const ItemPair& pair, std::uint64_t side_seed) {
  // Low bit of (seed + pair mix) decides; the pair mix decorrelates the
  // assignment across pairs sharing a seed base.
  std::uint64_t pair_mix = hash_mix(static_cast<std::uint64_t>(pair.lo) * 131u,
                                    static_cast<std::uint64_t>(pair.hi));
  return ((side_seed + pair_mix) & 1u) == 0;
}

BankConfig parse_bank_config(const std::string& json_text) {
  BankConfig cfg;
  try {
    json doc = json::parse(json_text);
    if (doc.contains("format_version") &&
        doc["format_version"] != kFormatVersion) {
      raise(ErrorKind::Config, "bank config has unsupported format_version");
    }
    if (doc.contains("seed")) cfg.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("layers")) {
      cfg.layers.clear();
      for (const auto& l : doc["layers"]) {
        auto layer = parse_layer(l.get<std::string>());
        if (!layer) {
          raise(ErrorKind::Config,
                "unknown layer '" + l.get<std::string>() + "'");
        }
        cfg.layers.push_back(*layer);
      }
    }
    if (doc.contains("domains")) {
      cfg.domains.clear();
      for (const auto& d : doc["domains"]) {
        cfg.domains.push_back(d.get<std::string>());
      }
    }
    cfg.instantiations = doc.value("instantiations", cfg.instantiations);
    cfg.perspectives = doc.value("perspectives", cfg.perspectives);
    cfg.pcs_pair_count = doc.value("pcs_pair_count", cfg.pcs_pair_count);
    cfg.taxonomies_path = doc.value("taxonomies_path", "");
    cfg.templates_path = doc.value("templates_path", "");
  } catch (const json::exception& e) {
    raise(ErrorKind::Config, std::string("bank config: ") + e.what());
  }
  return cfg;
}

const Scenario& Bank::scenario(const std::string& id) const {
  auto found = by_id.find(id);
  if (found == by_id.end()) {
    raise(ErrorKind::Data, "unknown scenario id " + id);
  }
  return scenarios[found->second];
}

std::vector<Domain> Bank::domains() const {
  std::vector<Domain> out;
  for (std::size_t i = 0; i < manifest.domains.size(); ++i) {
    out.push_back(Domain{static_cast<int>(i), manifest.domains[i]});
  }
  return out;
}

namespace {

std::string replace_all(std::string text, const std::string& slot,
                        const std::string& value) {
  std::size_t pos = 0;
  while ((pos = text.find(slot, pos)) != std::string::npos) {
    text.replace(pos, slot.size(), value);
    pos += value.size();
  }
  return text;
}

std::string scenario_identity(LayerId layer, const ItemPair& pair,
                              const std::string& domain, int instantiation,
                              int perspective, std::uint64_t side_seed) {
  std::ostringstream key;
  key << kFormatVersion << '|' << layer_tag(layer) << '|' << pair.lo << '-'
      << pair.hi << '|' << domain << "|i" << instantiation << "|p"
      << perspective << "|s" << side_seed;
  return hex16(fnv1a64(key.str()));
}

std::string build_prompt(const TemplateSet& templates, const TaxonomyItem& lo,
                         const TaxonomyItem& hi, const Domain& domain,
                         int instantiation, int perspective, bool lo_is_a) {
  auto setting_it = templates.settings.find(domain.name);
  if (setting_it == templates.settings.end()) {
    raise(ErrorKind::Config,
          "no narrative setting for domain '" + domain.name + "'");
  }
  const std::size_t frame_idx =
      static_cast<std::size_t>(instantiation - 1 + domain.index) %
      templates.frames.size();
  const std::string& a_stake = lo_is_a ? lo.stake : hi.stake;
  const std::string& b_stake = lo_is_a ? hi.stake : lo.stake;

  std::string body = templates.frames[frame_idx];
  body = replace_all(body, "{SETTING}", setting_it->second);
  body = replace_all(body, "{A}", a_stake);
  body = replace_all(body, "{B}", b_stake);

  std::ostringstream prompt;
  const std::string& framing =
      templates.perspectives[static_cast<std::size_t>(perspective)];
  if (!framing.empty()) prompt << framing << "\n\n";
  prompt << body << "\n\nOption A: " << a_stake << ".\nOption B: " << b_stake
         << ".\n\n" << templates.directive << "\n";
  return prompt.str();
}

}  // namespace

Bank build_bank(const BankConfig& config) {
  if (config.layers.empty()) {
    raise(ErrorKind::Config, "bank config names no layers");
  }
  if (config.domains.empty()) {
    raise(ErrorKind::Config, "bank config names no domains");
  }
  if (config.instantiations < 2) {
    raise(ErrorKind::Config,
          "instantiations must be >= 2 (repeat and replication metrics "
          "collapse below that)");
  }
  TemplateSet templates = load_templates(
      resolve_data_file(config.templates_path, "templates.json"));
  if (config.instantiations > static_cast<int>(templates.frames.size())) {
    raise(ErrorKind::Config,
          "instantiations exceed available narrative frames (" +
              std::to_string(templates.frames.size()) + ")");
  }
  if (config.perspectives < 1 ||
      config.perspectives > static_cast<int>(templates.perspectives.size())) {
    raise(ErrorKind::Config,
          "perspectives must be 1.." +
              std::to_string(templates.perspectives.size()));
  }
  TaxonomySet taxonomies = load_taxonomies(
      resolve_data_file(config.taxonomies_path, "taxonomies.json"));
  for (LayerId layer : config.layers) {
    if (!taxonomies.has(layer)) {
      raise(ErrorKind::Config,
            std::string("config includes layer ") + layer_tag(layer) +
                " but the taxonomy file does not define it");
    }
  }

  Bank bank;
  bank.manifest.seed = config.seed;
  bank.manifest.layers = config.layers;
  bank.manifest.domains = config.domains;
  bank.manifest.instantiations = config.instantiations;
  bank.manifest.perspectives = config.perspectives;
  bank.taxonomies = taxonomies;

  const int K = config.instantiations;
  const int P = config.perspectives;

  for (LayerId layer : config.layers) {
    const Taxonomy& taxonomy = taxonomies.layer(layer);
    const auto pairs = enumerate_pairs(taxonomy);

    // PCS subset: a seeded sample of pairs, re-framed from every
    // perspective. Recorded in the manifest so metrics know the scope.
    std::vector<ItemPair> pcs_subset = pairs;
    deterministic_shuffle(pcs_subset,
                          hash_mix(config.seed, fnv1a64(layer_tag(layer))));
    const int pcs_count = std::min<int>(config.pcs_pair_count,
                                        static_cast<int>(pcs_subset.size()));
    pcs_subset.resize(static_cast<std::size_t>(pcs_count));
    std::sort(pcs_subset.begin(), pcs_subset.end());
    bank.manifest.pcs_pairs[layer] = pcs_subset;

    int neutral = 0;
    int pcs_extra = 0;
    for (const ItemPair& pair : pairs) {
      const bool in_pcs = std::binary_search(pcs_subset.begin(),
                                             pcs_subset.end(), pair);
      const std::uint64_t side_base =
          hash_mix(hash_mix(config.seed, fnv1a64(layer_tag(layer))),
                   static_cast<std::uint64_t>(pair.lo * 64 + pair.hi));
      for (std::size_t di = 0; di < config.domains.size(); ++di) {
        Domain domain{static_cast<int>(di), config.domains[di]};
        for (int inst = 1; inst <= K; ++inst) {
          // Incrementing the seed across cells alternates the side
          // assignment, so each pair is counterbalanced to within parity.
          const std::uint64_t side_seed =
              side_base + static_cast<std::uint64_t>(di) *
                              static_cast<std::uint64_t>(K) +
              static_cast<std::uint64_t>(inst - 1);
          const bool lo_is_a = assign_option_sides(pair, side_seed);

          auto emit = [&](int perspective) {
            Scenario s;
            s.layer = layer;
            s.pair = pair;
            s.domain = domain;
            s.instantiation = inst;
            s.perspective = perspective;
            s.side_seed = side_seed;
            s.lo_is_option_a = lo_is_a;
            s.id = scenario_identity(layer, pair, domain.name, inst,
                                     perspective, side_seed);
            s.prompt = build_prompt(templates, taxonomy.item(pair.lo),
                                    taxonomy.item(pair.hi), domain, inst,
                                    perspective, lo_is_a);
            if (!bank.by_id.emplace(s.id, bank.scenarios.size()).second) {
              raise(ErrorKind::Config, "scenario id collision at " + s.id);
            }
            bank.scenarios.push_back(std::move(s));
          };

          emit(0);
          ++neutral;
          if (in_pcs && inst == 1) {
            for (int persp = 1; persp < P; ++persp) {
              emit(persp);
              ++pcs_extra;
            }
          }
        }
      }
    }
    bank.manifest.neutral_counts[layer] = neutral;
    bank.manifest.pcs_counts[layer] = pcs_extra;
  }
  return bank;
}

namespace {

json manifest_to_json(const BankManifest& m) {
  json layers = json::array();
  for (LayerId l : m.layers) layers.push_back(layer_tag(l));
  json neutral;
  json pcs_counts;
  json pcs_pairs;
  for (LayerId l : m.layers) {
    neutral[layer_tag(l)] = m.neutral_counts.at(l);
    pcs_counts[layer_tag(l)] = m.pcs_counts.at(l);
    json arr = json::array();
    for (const ItemPair& p : m.pcs_pairs.at(l)) {
      arr.push_back({{"lo", p.lo}, {"hi", p.hi}});
    }
    pcs_pairs[layer_tag(l)] = arr;
  }
  return json{{"format_version", m.format_version},
              {"seed", m.seed},
              {"layers", layers},
              {"domains", m.domains},
              {"instantiations", m.instantiations},
              {"perspectives", m.perspectives},
              {"neutral_counts", neutral},
              {"pcs_counts", pcs_counts},
              {"pcs_pairs", pcs_pairs}};
}

BankManifest manifest_from_json(const json& doc) {
  BankManifest m;
  m.format_version = doc.at("format_version").get<std::string>();
  if (m.format_version != kFormatVersion) {
    raise(ErrorKind::Config, "bank manifest has unsupported format_version " +
                                 m.format_version);
  }
  m.seed = doc.at("seed").get<std::uint64_t>();
  for (const auto& l : doc.at("layers")) {
    auto layer = parse_layer(l.get<std::string>());
    if (!layer) raise(ErrorKind::Config, "bad layer in bank manifest");
    m.layers.push_back(*layer);
  }
  for (const auto& d : doc.at("domains")) {
    m.domains.push_back(d.get<std::string>());
  }
  m.instantiations = doc.at("instantiations").get<int>();
  m.perspectives = doc.at("perspectives").get<int>();
  for (LayerId l : m.layers) {
    m.neutral_counts[l] = doc.at("neutral_counts").at(layer_tag(l)).get<int>();
    m.pcs_counts[l] = doc.at("pcs_counts").at(layer_tag(l)).get<int>();
    std::vector<ItemPair> pairs;
    for (const auto& p : doc.at("pcs_pairs").at(layer_tag(l))) {
      pairs.push_back(
          ItemPair{l, p.at("lo").get<int>(), p.at("hi").get<int>()});
    }
    m.pcs_pairs[l] = std::move(pairs);
  }
  return m;
}

json scenario_to_json(const Scenario& s) {
  return json{{"id", s.id},
              {"layer", layer_tag(s.layer)},
              {"pair", {{"lo", s.pair.lo}, {"hi", s.pair.hi}}},
              {"domain", {{"index", s.domain.index}, {"name", s.domain.name}}},
              {"instantiation", s.instantiation},
              {"perspective", s.perspective},
              {"side_seed", s.side_seed},
              {"option_map", {{"A", s.lo_is_option_a ? "lo" : "hi"},
                              {"B", s.lo_is_option_a ? "hi" : "lo"}}},
              {"prompt", s.prompt}};
}

Scenario scenario_from_json(const json& doc) {
  Scenario s;
  s.id = doc.at("id").get<std::string>();
  auto layer = parse_layer(doc.at("layer").get<std::string>());
  if (!layer) raise(ErrorKind::Data, "bad layer in scenario " + s.id);
  s.layer = *layer;
  s.pair = ItemPair{s.layer, doc.at("pair").at("lo").get<int>(),
                    doc.at("pair").at("hi").get<int>()};
  s.domain.index = doc.at("domain").at("index").get<int>();
  s.domain.name = doc.at("domain").at("name").get<std::string>();
  s.instantiation = doc.at("instantiation").get<int>();
  s.perspective = doc.at("perspective").get<int>();
  s.side_seed = doc.at("side_seed").get<std::uint64_t>();
  s.lo_is_option_a = doc.at("option_map").at("A").get<std::string>() == "lo";
  s.prompt = doc.at("prompt").get<std::string>();
  return s;
}

json taxonomies_to_json(const TaxonomySet& set) {
  json layers;
  for (const auto& [id, tax] : set.layers) {
    json items = json::array();
    for (const auto& it : tax.items) {
      items.push_back({{"index", it.index},
                       {"name", it.name},
                       {"category", it.category},
                       {"stake", it.stake}});
    }
    layers[layer_tag(id)] = json{{"items", items}};
  }
  return json{{"format_version", kFormatVersion}, {"layers", layers}};
}

TaxonomySet taxonomies_from_json(const json& doc) {
  TaxonomySet set;
  for (const auto& [key, body] : doc.at("layers").items()) {
    auto layer = parse_layer(key);
    if (!layer) raise(ErrorKind::Config, "bad layer key in bank taxonomies");
    Taxonomy tax;
    tax.layer = *layer;
    for (const auto& item : body.at("items")) {
      tax.items.push_back(TaxonomyItem{item.at("index").get<int>(),
                                       item.at("name").get<std::string>(),
                                       item.value("category", ""),
                                       item.value("stake", "")});
    }
    set.layers[*layer] = std::move(tax);
  }
  return set;
}

}  // namespace

void save_bank(const Bank& bank, const std::string& directory) {
  fs::create_directories(directory);
  {
    std::ofstream out(fs::path(directory) / "manifest.json",
                      std::ios::binary);
    if (!out) raise(ErrorKind::Io, "cannot write bank manifest");
    out << manifest_to_json(bank.manifest).dump(2) << '\n';
  }
  {
    std::ofstream out(fs::path(directory) / "taxonomies.json",
                      std::ios::binary);
    out << taxonomies_to_json(bank.taxonomies).dump(2) << '\n';
  }
  {
    std::ofstream out(fs::path(directory) / "scenarios.jsonl",
                      std::ios::binary);
    if (!out) raise(ErrorKind::Io, "cannot write scenario file");
    out << json{{"format_version", kFormatVersion}, {"kind", "scenarios"}}
               .dump()
        << '\n';
    for (const Scenario& s : bank.scenarios) {
      out << scenario_to_json(s).dump() << '\n';
    }
  }
}

Bank load_bank(const std::string& directory) {
  const fs::path dir(directory);
  if (!fs::exists(dir / "manifest.json")) {
    raise(ErrorKind::BankMissing, "no bank at " + directory);
  }
  Bank bank;
  {
    std::ifstream in(dir / "manifest.json");
    json doc;
    in >> doc;
    bank.manifest = manifest_from_json(doc);
  }
  {
    std::ifstream in(dir / "taxonomies.json");
    if (!in) raise(ErrorKind::Io, "bank taxonomies missing");
    json doc;
    in >> doc;
    bank.taxonomies = taxonomies_from_json(doc);
  }
  {
    std::ifstream in(dir / "scenarios.jsonl");
    if (!in) raise(ErrorKind::Io, "bank scenario file missing");
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json doc = json::parse(line);
      if (header) {
        if (doc.value("format_version", "") != kFormatVersion) {
          raise(ErrorKind::Config,
                "scenario file has unsupported format_version");
        }
        header = false;
        continue;
      }
      Scenario s = scenario_from_json(doc);
      bank.by_id.emplace(s.id, bank.scenarios.size());
      bank.scenarios.push_back(std::move(s));
    }
  }
  return bank;
}

}  // namespace prism
