#pragma once

#include <string>
#include <vector>

namespace ctomics {

// Fixed feature-column enumerations. The text files published from these
// lists are the normative schema: extractors emit vectors in exactly this
// order, and model-group selection keys off the clin_/ca_/fat_ prefixes.
struct RegistryEntry {
  std::string name;
  std::string scale;
  std::string unit;
};

const std::vector<RegistryEntry>& clinical_registry();  // 24 columns
const std::vector<RegistryEntry>& calcium_registry();   // 189 columns
const std::vector<RegistryEntry>& fat_registry();       // 211 columns

std::vector<std::string> registry_names(const std::vector<RegistryEntry>& reg);

// All feature columns in table order: clinical, calcium, fat (424 names).
std::vector<std::string> all_feature_names();

// Versioned text form: "registry <family> v1" then one name\tscale\tunit line
// per column, with leading '#' comment lines for encodings.
std::string registry_text(const std::string& family);

// Names of the per-lesion features summarized in the calcium registry blocks.
const std::vector<std::string>& lesion_feature_names();  // 15
const std::vector<std::string>& territory_short_names(); // lm, lad, lcx, rca

}  // namespace ctomics
