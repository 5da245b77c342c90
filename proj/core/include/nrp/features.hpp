#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "nrp/signal.hpp"

namespace nrp {

enum class FeatureGroup { Peak, Sips, Flow, Raw, Cln };
enum class FeatureMode { Combination, PostOnly, PreOnly };

std::string feature_group_name(FeatureGroup g);
std::string feature_mode_name(FeatureMode m);
FeatureGroup parse_feature_group(const std::string& text);
FeatureMode parse_feature_mode(const std::string& text);

struct FeatureConfig {
  std::set<FeatureGroup> groups = {FeatureGroup::Peak, FeatureGroup::Sips, FeatureGroup::Flow};
  FeatureMode mode = FeatureMode::Combination;
  std::set<View> views = {View::Ap, View::Lateral};
  int raw_length = 15;
  double beta = 0.5;  // exponential-decay rate of the RAW fill, per frame
  double plateau_epsilon = 0.01;
  double onset_epsilon = 0.01;
  double decay_fraction = 0.1;
  bool decay_literal_mode = false;    // decayTime threshold 0.9*max (formula as printed)
  bool raw_fill_continuity = false;   // RAW fill exponent -beta*(t-n-1) variant

  std::string describe() const;
};

struct FeatureVector {
  std::string patient_id;
  std::vector<std::string> names;
  std::vector<double> values;
};

struct NamedValue {
  std::string name;
  double value;
};

// Pre/post difference features (combination mode). 1-based frame indices.
std::vector<NamedValue> peak_features(const PerfusionSignal& pre, const PerfusionSignal& post,
                                      const FeatureConfig& cfg);
std::vector<NamedValue> sips_features(const PerfusionSignal& pre, const PerfusionSignal& post,
                                      const FeatureConfig& cfg);
std::vector<NamedValue> flow_features(const PerfusionSignal& pre, const PerfusionSignal& post,
                                      const FeatureConfig& cfg);

// Single-signal analogues for post_only / pre_only modes.
std::vector<NamedValue> peak_features_single(const PerfusionSignal& x, const FeatureConfig& cfg);
std::vector<NamedValue> sips_features_single(const PerfusionSignal& x, const FeatureConfig& cfg);
std::vector<NamedValue> flow_features_single(const PerfusionSignal& x, const FeatureConfig& cfg);

/// Fixed-length vector from the aligned post signal: truncate to raw_length
/// or fill the tail by exponential decay, clamped below at 0.
std::vector<double> raw_vector(const PerfusionSignal& post, const FeatureConfig& cfg);

/// Assembles the time-series feature vector (PEAK/SIPS/FLOW/RAW groups) for
/// one patient; CLN encoding is fold-dependent and handled by the pipeline.
FeatureVector extract_all(const std::map<SeqKey, PerfusionSignal>& signals,
                          const FeatureConfig& cfg, const std::string& patient_id = "");

/// Feature names extract_all would emit for this config (deterministic order).
std::vector<std::string> feature_names(const FeatureConfig& cfg);

// CSV export/import of feature matrices; header row of names, patient_id
// first column, bit-exact double round-trip.
void write_feature_csv(const std::filesystem::path& path,
                       const std::vector<FeatureVector>& rows);
std::vector<FeatureVector> read_feature_csv(const std::filesystem::path& path);

}  // namespace nrp
