/* Copyright 2026 The Waterbird Count Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "waterbird/errors.hpp"

namespace waterbird {

struct RawClass {
  std::string name;
  std::string abbreviation;
  std::string trained;  // trained class this raw label folds into
};

/// Raw annotation labels, the classes a detector is trained on, the mapping
/// between them, and the minority subset targeted by oversampling.
class ClassTaxonomy {
 public:
  ClassTaxonomy(std::vector<RawClass> raw, std::vector<std::string> trained,
                std::set<std::string> minority)
      : raw_(std::move(raw)), trained_(std::move(trained)), minority_(std::move(minority)) {
    validate();
  }

  /// The built-in waterbird taxonomy: 24 raw labels folded into 16 classes.
  static ClassTaxonomy waterbirds();

  static ClassTaxonomy from_json(const nlohmann::json& j);
  static ClassTaxonomy load(const std::string& path);
  nlohmann::json to_json() const;

  const std::vector<RawClass>& raw_classes() const noexcept { return raw_; }
  const std::vector<std::string>& trained_classes() const noexcept { return trained_; }
  const std::set<std::string>& minority_set() const noexcept { return minority_; }
  std::size_t size() const noexcept { return trained_.size(); }

  /// Trained class for a raw label, matched by full name or abbreviation.
  /// Trained class names fold to themselves.
  std::optional<std::string> fold(const std::string& raw_label) const {
    for (const auto& r : raw_) {
      if (r.name == raw_label || r.abbreviation == raw_label) return r.trained;
    }
    if (index_of(raw_label)) return raw_label;
    return std::nullopt;
  }

  std::optional<std::size_t> index_of(const std::string& trained_class) const {
    auto it = std::find(trained_.begin(), trained_.end(), trained_class);
    if (it == trained_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - trained_.begin());
  }

  bool contains(const std::string& trained_class) const {
    return index_of(trained_class).has_value();
  }

  bool is_minority(const std::string& trained_class) const {
    return minority_.count(trained_class) != 0;
  }

 private:
  void validate() const {
    if (trained_.empty()) throw InputError("taxonomy has no trained classes");
    std::set<std::string> seen;
    for (const auto& t : trained_) {
      if (!seen.insert(t).second) throw InputError("duplicate trained class: " + t);
    }
    std::set<std::string> names;
    for (const auto& r : raw_) {
      if (!names.insert(r.name).second) throw InputError("duplicate raw class: " + r.name);
      if (!seen.count(r.trained)) {
        throw InputError("raw class " + r.name + " folds into unknown class " + r.trained);
      }
    }
    for (const auto& m : minority_) {
      if (!seen.count(m)) throw InputError("minority class is not a trained class: " + m);
    }
  }

  std::vector<RawClass> raw_;
  std::vector<std::string> trained_;
  std::set<std::string> minority_;
};

inline ClassTaxonomy ClassTaxonomy::waterbirds() {
  // Trained classes, most to least frequent in the survey data; "Other" last.
  std::vector<RawClass> raw = {
      {"Mixed Tern Adult", "MTRNA", "Mixed Tern Adult"},
      {"Laughing Gull Adult", "LAGUA", "Laughing Gull Adult"},
      {"Brown Pelican Adult", "BRPEA", "Brown Pelican Adult"},
      {"White Ibis Adult", "WHIBA", "White Ibis Adult"},
      {"Reddish Egret Adult", "REEGA", "Reddish Egret Adult"},
      {"Black Skimmer Adult", "BLSKA", "Black Skimmer Adult"},
      {"Cattle Egret Adult", "CAEGA", "Cattle Egret Adult"},
      {"Black-crowned Night Heron Adult", "BCNHA", "Black-crowned Night Heron Adult"},
      {"Tri-colored Heron Adult", "TRHEA", "Tri-colored Heron Adult"},
      {"Mixed Egret", "MEGRT", "Mixed Egret"},
      {"Great Blue Heron Adult", "GBHEA", "Great Blue Heron Adult"},
      {"Roseate Spoonbill Adult", "ROSPA", "Roseate Spoonbill Adult"},
      {"Brown Pelican Chick", "BRPEC", "Brown Pelican Chick"},
      {"Mixed Tern Flying", "MTRNF", "Mixed Tern Flying"},
      {"Laughing Gull Flying", "LAGUF", "Laughing Gull Flying"},
      // Labels that are not trained individually.
      {"Great Egret Adult", "GREGA", "Other"},
      {"Snowy Egret Adult", "SNEGA", "Other"},
      {"Brown Pelican Juvenile", "BRPEJ", "Other"},
      {"Brown Pelican Flying", "BRPEF", "Other"},
      {"White Ibis Juvenile", "WHIBJ", "Other"},
      {"Great Egret Flying", "GREGF", "Other"},
      {"Double-crested Cormorant Adult", "DCCOA", "Other"},
      {"Black Skimmer Flying", "BLSKF", "Other"},
      {"Other", "OTHRA", "Other"},
  };
  std::vector<std::string> trained;
  for (std::size_t i = 0; i < 15; ++i) trained.push_back(raw[i].name);
  trained.emplace_back("Other");
  std::set<std::string> minority = {
      "Brown Pelican Adult",     "White Ibis Adult",        "Reddish Egret Adult",
      "Tri-colored Heron Adult", "Great Blue Heron Adult",  "Roseate Spoonbill Adult",
      "Brown Pelican Chick"};
  return ClassTaxonomy(std::move(raw), std::move(trained), std::move(minority));
}

inline ClassTaxonomy ClassTaxonomy::from_json(const nlohmann::json& j) {
  try {
    std::vector<RawClass> raw;
    for (const auto& r : j.at("raw_classes")) {
      raw.push_back({r.at("name").get<std::string>(),
                     r.value("abbreviation", std::string{}),
                     r.at("trained").get<std::string>()});
    }
    auto trained = j.at("trained_classes").get<std::vector<std::string>>();
    auto minority = j.value("minority", std::vector<std::string>{});
    return ClassTaxonomy(std::move(raw), std::move(trained),
                         std::set<std::string>(minority.begin(), minority.end()));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("taxonomy: ") + e.what());
  }
}

inline ClassTaxonomy ClassTaxonomy::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open taxonomy file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, path + ": " + e.what());
  }
  return from_json(j);
}

inline nlohmann::json ClassTaxonomy::to_json() const {
  nlohmann::json raw = nlohmann::json::array();
  for (const auto& r : raw_) {
    raw.push_back({{"name", r.name}, {"abbreviation", r.abbreviation}, {"trained", r.trained}});
  }
  // Minority classes listed in trained order, not set order.
  std::vector<std::string> minority;
  for (const auto& t : trained_) {
    if (is_minority(t)) minority.push_back(t);
  }
  return {{"raw_classes", raw}, {"trained_classes", trained_}, {"minority", minority}};
}

}  // namespace waterbird
