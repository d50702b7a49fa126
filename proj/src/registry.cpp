#include "ctomics/registry.hpp"

#include "ctomics/error.hpp"

namespace ctomics {

namespace {

const char* kBandLo[8] = {"190", "170", "150", "130", "110", "90", "70", "50"};
const char* kBandHi[8] = {"170", "150", "130", "110", "90", "70", "50", "30"};
const char* kCaHist[8] = {"130_230", "230_330", "330_430", "430_530",
                          "530_630", "630_730", "730_830", "830_up"};

std::vector<RegistryEntry> build_clinical() {
  return {
      {"clin_male", "patient", "binary"},
      {"clin_age", "patient", "years"},
      {"clin_bmi", "patient", "kg_m2"},
      {"clin_bmi_band", "patient", "binary"},
      {"clin_age_band", "patient", "binary"},
      {"clin_diabetes", "patient", "binary"},
      {"clin_height_m", "patient", "m"},
      {"clin_weight_kg", "patient", "kg"},
      {"clin_smoking", "patient", "level"},
      {"clin_cigs_per_day", "patient", "per_day"},
      {"clin_hypertension", "patient", "binary"},
      {"clin_total_chol", "patient", "mmol_l"},
      {"clin_hdl_chol", "patient", "mmol_l"},
      {"clin_chd_family_history", "patient", "binary"},
      {"clin_sbp_mmhg", "patient", "mmHg"},
      {"clin_dbp_mmhg", "patient", "mmHg"},
      {"clin_chest_pain_cardiac", "patient", "binary"},
      {"clin_antiplatelet", "patient", "binary"},
      {"clin_statin", "patient", "binary"},
      {"clin_ace_inhibitor", "patient", "binary"},
      {"clin_calcium_blocker", "patient", "binary"},
      {"clin_nitrates", "patient", "binary"},
      {"clin_betablocker", "patient", "binary"},
      {"clin_hyperlipidemia", "patient", "binary"},
  };
}

struct LesionFeatureDef {
  const char* name;
  const char* unit;
};

const LesionFeatureDef kLesionFeatures[15] = {
    {"voxel_count", "count"},   {"volume_mm3", "mm3"},
    {"mass_mgeq", "mg"},        {"agatston", "score"},
    {"hu_min", "HU"},           {"hu_max", "HU"},
    {"hu_mean", "HU"},          {"hu_variance", "HU2"},
    {"hu_skewness", "ratio"},   {"hu_kurtosis", "ratio"},
    {"max_diameter_mm", "mm"},  {"sphericity", "ratio"},
    {"elongation", "ratio"},    {"dist_next_mm", "mm"},
    {"dist_to_top_mm", "mm"},
};

// territory blocks summarize these 7 per-lesion features with mean and max
const int kTerritoryLesionIdx[7] = {3, 1, 2, 6, 10, 13, 14};

std::vector<RegistryEntry> build_calcium() {
  std::vector<RegistryEntry> r;
  r.push_back({"ca_lesion_count", "lesion", "count"});
  for (const auto& f : kLesionFeatures) {
    std::string base = std::string("ca_lesion_") + f.name;
    r.push_back({base + "_mean", "lesion", f.unit});
    r.push_back({base + "_max", "lesion", f.unit});
    r.push_back({base + "_sd", "lesion", f.unit});
  }
  for (const auto& t : territory_short_names()) {
    std::string p = "ca_" + t + "_";
    r.push_back({p + "lesion_count", "territory", "count"});
    r.push_back({p + "agatston", "territory", "score"});
    r.push_back({p + "volume_mm3", "territory", "mm3"});
    r.push_back({p + "mass_mgeq", "territory", "mg"});
    r.push_back({p + "hu_mean", "territory", "HU"});
    r.push_back({p + "hu_sd", "territory", "HU"});
    r.push_back({p + "hu_skewness", "territory", "ratio"});
    r.push_back({p + "hu_kurtosis", "territory", "ratio"});
    r.push_back({p + "diffusivity", "territory", "ratio"});
    for (const auto* h : kCaHist)
      r.push_back({p + "hist_" + h, "territory", "voxels"});
    for (int idx : kTerritoryLesionIdx) {
      std::string base = p + "lesion_" + kLesionFeatures[idx].name;
      r.push_back({base + "_mean", "territory", kLesionFeatures[idx].unit});
      r.push_back({base + "_max", "territory", kLesionFeatures[idx].unit});
    }
  }
  r.push_back({"ca_heart_agatston", "heart", "score"});
  r.push_back({"ca_heart_volume_mm3", "heart", "mm3"});
  r.push_back({"ca_heart_mass_mgeq", "heart", "mg"});
  r.push_back({"ca_heart_hu_mean", "heart", "HU"});
  r.push_back({"ca_heart_hu_sd", "heart", "HU"});
  r.push_back({"ca_heart_hu_skewness", "heart", "ratio"});
  r.push_back({"ca_heart_hu_kurtosis", "heart", "ratio"});
  for (const auto* h : kCaHist)
    r.push_back({std::string("ca_heart_hist_") + h, "heart", "voxels"});
  r.push_back({"ca_heart_cac_category", "heart", "category"});
  r.push_back({"ca_heart_diffusivity", "heart", "ratio"});
  r.push_back({"ca_heart_territories_with_lesions", "heart", "count"});
  r.push_back({"ca_heart_dominant_territory_share", "heart", "ratio"});
  return r;
}

std::vector<RegistryEntry> build_fat() {
  std::vector<RegistryEntry> r;
  r.push_back({"fat_volume_ml", "global", "mL"});
  r.push_back({"fat_axis_major_mm", "global", "mm"});
  r.push_back({"fat_axis_middle_mm", "global", "mm"});
  r.push_back({"fat_axis_minor_mm", "global", "mm"});
  r.push_back({"fat_thickness_mean_mm", "global", "mm"});
  r.push_back({"fat_surface_area_mm2", "global", "mm2"});
  r.push_back({"fat_sphericity", "global", "ratio"});
  r.push_back({"fat_elongation", "global", "ratio"});
  r.push_back({"fat_hu_min", "global", "HU"});
  r.push_back({"fat_hu_max", "global", "HU"});
  r.push_back({"fat_hu_mean", "global", "HU"});
  r.push_back({"fat_hu_sd", "global", "HU"});
  r.push_back({"fat_hu_skewness", "global", "ratio"});
  r.push_back({"fat_hu_kurtosis", "global", "ratio"});
  r.push_back({"fat_hu_entropy_bits", "global", "bits"});
  for (int b = 0; b < 8; ++b)
    r.push_back({std::string("fat_hist_") + kBandLo[b] + "_" + kBandHi[b],
                 "global", "voxels"});
  for (int q = 1; q <= 4; ++q) {
    std::string p = "fat_q" + std::to_string(q) + "_";
    r.push_back({p + "volume_ml", "slab", "mL"});
    r.push_back({p + "volume_fraction", "slab", "ratio"});
    r.push_back({p + "hu_min", "slab", "HU"});
    r.push_back({p + "hu_max", "slab", "HU"});
    r.push_back({p + "hu_mean", "slab", "HU"});
    r.push_back({p + "hu_sd", "slab", "HU"});
    r.push_back({p + "hu_skewness", "slab", "ratio"});
    r.push_back({p + "hu_kurtosis", "slab", "ratio"});
    r.push_back({p + "hu_entropy_bits", "slab", "bits"});
    r.push_back({p + "thickness_mean_mm", "slab", "mm"});
    for (int b = 0; b < 8; ++b)
      r.push_back({"fat_PQ" + std::to_string(q) + "_Vol_" + kBandLo[b] + "_" +
                       kBandHi[b],
                   "slab", "mL"});
  }
  for (int rb = 1; rb <= 4; ++rb) {
    std::string p = "fat_r" + std::to_string(rb) + "_";
    r.push_back({p + "volume_ml", "ribbon", "mL"});
    r.push_back({p + "volume_fraction", "ribbon", "ratio"});
    r.push_back({p + "hu_min", "ribbon", "HU"});
    r.push_back({p + "hu_max", "ribbon", "HU"});
    r.push_back({p + "hu_mean", "ribbon", "HU"});
    r.push_back({p + "hu_sd", "ribbon", "HU"});
    r.push_back({p + "hu_skewness", "ribbon", "ratio"});
    r.push_back({p + "hu_kurtosis", "ribbon", "ratio"});
    r.push_back({p + "hu_entropy_bits", "ribbon", "bits"});
    for (int b = 0; b < 8; ++b)
      r.push_back({"fat_PR" + std::to_string(rb) + "_Vol_" + kBandLo[b] + "_" +
                       kBandHi[b],
                   "ribbon", "mL"});
  }
  for (int q = 1; q <= 4; ++q)
    for (int rb = 1; rb <= 4; ++rb) {
      std::string p = "fat_q" + std::to_string(q) + "r" + std::to_string(rb) + "_";
      r.push_back({p + "volume_ml", "cell", "mL"});
      r.push_back({p + "hu_mean", "cell", "HU"});
      r.push_back({p + "hu_sd", "cell", "HU"});
    }
  return r;
}

}  // namespace

const std::vector<RegistryEntry>& clinical_registry() {
  static const std::vector<RegistryEntry> reg = build_clinical();
  return reg;
}

const std::vector<RegistryEntry>& calcium_registry() {
  static const std::vector<RegistryEntry> reg = build_calcium();
  return reg;
}

const std::vector<RegistryEntry>& fat_registry() {
  static const std::vector<RegistryEntry> reg = build_fat();
  return reg;
}

std::vector<std::string> registry_names(const std::vector<RegistryEntry>& reg) {
  std::vector<std::string> names;
  names.reserve(reg.size());
  for (const auto& e : reg) names.push_back(e.name);
  return names;
}

std::vector<std::string> all_feature_names() {
  std::vector<std::string> names = registry_names(clinical_registry());
  for (const auto& e : calcium_registry()) names.push_back(e.name);
  for (const auto& e : fat_registry()) names.push_back(e.name);
  return names;
}

const std::vector<std::string>& lesion_feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& f : kLesionFeatures) v.push_back(f.name);
    return v;
  }();
  return names;
}

const std::vector<std::string>& territory_short_names() {
  static const std::vector<std::string> names = {"lm", "lad", "lcx", "rca"};
  return names;
}

std::string registry_text(const std::string& family) {
  const std::vector<RegistryEntry>* reg = nullptr;
  std::string header;
  if (family == "clinical") {
    reg = &clinical_registry();
    header =
        "# encodings: binary 0/1; smoking 0 never, 1 prior, 2 current;\n"
        "# bmi_band 1 when bmi >= 30; age_band 1 when age >= 60;\n"
        "# chest_pain_cardiac 1 when pain judged cardiac-typical\n";
  } else if (family == "calcium") {
    reg = &calcium_registry();
    header =
        "# hist bins: HU width 100 from 130, last bin open above 830\n"
        "# cac_category: 0 absent, 1 mild (0,100], 2 moderate (100,400), 3 severe >=400\n";
  } else if (family == "fat") {
    reg = &fat_registry();
    header =
        "# bands: HU width 20 over [-190,-30], names carry |edge| values\n"
        "# slabs q1..q4 inferior to superior; ribbons r1 outermost to r4 core\n";
  } else {
    fail(ErrorCode::bad_argument, "unknown registry family: " + family);
  }
  std::string out = "registry " + family + " v1\n" + header;
  for (const auto& e : *reg)
    out += e.name + "\t" + e.scale + "\t" + e.unit + "\n";
  return out;
}

}  // namespace ctomics
