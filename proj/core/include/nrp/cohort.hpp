#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nrp/raster.hpp"

namespace nrp {

enum class Phase { Pre, Post };
enum class View { Ap, Lateral };

std::string phase_name(Phase p);
std::string view_name(View v);

/// (phase, view) key for sequences and masks: "pre_ap", "post_lateral", ...
struct SeqKey {
  Phase phase;
  View view;

  auto operator<=>(const SeqKey&) const = default;
  std::string str() const { return phase_name(phase) + "_" + view_name(view); }
};

SeqKey parse_seq_key(const std::string& text);

inline const SeqKey kAllSeqKeys[4] = {
    {Phase::Pre, View::Ap},
    {Phase::Pre, View::Lateral},
    {Phase::Post, View::Ap},
    {Phase::Post, View::Lateral},
};

struct SequenceRef {
  std::filesystem::path dir;  // directory of lexicographically ordered frames
  std::optional<double> frame_rate;
  std::optional<int> bit_depth;
};

enum class Sex { Female, Male };
enum class Mtici { TwoC, Three };

struct PatientRecord {
  std::string id;
  int label = 0;  // 1 = no-reflow
  double age = 0.0;
  Sex sex = Sex::Female;
  Mtici mtici = Mtici::TwoC;
  std::optional<int> nihss;
  std::optional<int> passes;
  std::optional<std::string> race;
  std::map<SeqKey, SequenceRef> sequences;
  std::map<SeqKey, std::filesystem::path> masks;
};

struct CohortManifest {
  std::vector<PatientRecord> patients;
  double frame_rate_default = 3.0;
  int bit_depth_default = 8;
  std::filesystem::path base_dir;  // directory of the manifest file
};

struct ValidationIssue {
  std::string patient_id;
  std::string sequence;  // seq key or empty for patient-level issues
  std::string code;
  std::string message;
};

CohortManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const CohortManifest& manifest, const std::filesystem::path& path);

FrameStack load_frame_stack(const SequenceRef& ref, const CohortManifest& manifest);

/// Checks that every referenced sequence and mask is loadable and
/// dimension-consistent. Issues are data, not failures.
std::vector<ValidationIssue> validate_cohort(const CohortManifest& manifest);

}  // namespace nrp
