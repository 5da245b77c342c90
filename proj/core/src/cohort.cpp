#include "nrp/cohort.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "json.hpp"

namespace nrp {

using nlohmann::json;

std::string phase_name(Phase p) { return p == Phase::Pre ? "pre" : "post"; }
std::string view_name(View v) { return v == View::Ap ? "ap" : "lateral"; }

SeqKey parse_seq_key(const std::string& text) {
  for (const SeqKey& key : kAllSeqKeys)
    if (key.str() == text) return key;
  throw Error(ErrorCode::ParseError, "bad sequence key '" + text + "'");
}

namespace {

Sex parse_sex(const std::string& s) {
  if (s == "female") return Sex::Female;
  if (s == "male") return Sex::Male;
  throw Error(ErrorCode::ParseError, "bad sex '" + s + "'");
}

Mtici parse_mtici(const std::string& s) {
  if (s == "2c") return Mtici::TwoC;
  if (s == "3") return Mtici::Three;
  throw Error(ErrorCode::ParseError, "bad mtici '" + s + "'");
}

PatientRecord parse_patient(const json& jp) {
  PatientRecord rec;
  rec.id = jp.at("id").get<std::string>();
  rec.label = jp.at("label").get<int>();
  if (rec.label != 0 && rec.label != 1)
    throw Error(ErrorCode::ParseError, "patient " + rec.id + ": label must be 0 or 1");
  rec.age = jp.at("age").get<double>();
  if (!(rec.age > 0))
    throw Error(ErrorCode::ParseError, "patient " + rec.id + ": age must be positive");
  rec.sex = parse_sex(jp.at("sex").get<std::string>());
  rec.mtici = parse_mtici(jp.at("mtici").get<std::string>());
  if (jp.contains("nihss") && !jp["nihss"].is_null()) {
    rec.nihss = jp["nihss"].get<int>();
    if (*rec.nihss < 0)
      throw Error(ErrorCode::ParseError, "patient " + rec.id + ": nihss must be >= 0");
  }
  if (jp.contains("passes") && !jp["passes"].is_null()) {
    rec.passes = jp["passes"].get<int>();
    if (*rec.passes < 1)
      throw Error(ErrorCode::ParseError, "patient " + rec.id + ": passes must be >= 1");
  }
  if (jp.contains("race") && !jp["race"].is_null())
    rec.race = jp["race"].get<std::string>();

  if (jp.contains("sequences")) {
    for (auto& [key_text, jseq] : jp["sequences"].items()) {
      SeqKey key = parse_seq_key(key_text);
      SequenceRef ref;
      ref.dir = jseq.at("dir").get<std::string>();
      if (jseq.contains("frame_rate") && !jseq["frame_rate"].is_null())
        ref.frame_rate = jseq["frame_rate"].get<double>();
      if (jseq.contains("bit_depth") && !jseq["bit_depth"].is_null())
        ref.bit_depth = jseq["bit_depth"].get<int>();
      rec.sequences[key] = ref;
    }
  }
  if (jp.contains("masks")) {
    for (auto& [key_text, jmask] : jp["masks"].items())
      rec.masks[parse_seq_key(key_text)] = std::filesystem::path(jmask.get<std::string>());
  }
  for (auto& [key, ref] : rec.sequences) {
    (void)ref;
    if (!rec.masks.count(key))
      throw Error(ErrorCode::MissingMaskForSequence,
                  "patient " + rec.id + ": no mask for sequence " + key.str());
  }
  return rec;
}

}  // namespace

CohortManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());

  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }

  CohortManifest manifest;
  manifest.base_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  try {
    if (doc.contains("frame_rate_default"))
      manifest.frame_rate_default = doc["frame_rate_default"].get<double>();
    if (doc.contains("bit_depth_default"))
      manifest.bit_depth_default = doc["bit_depth_default"].get<int>();
    if (manifest.frame_rate_default <= 0)
      throw Error(ErrorCode::ParseError, "frame_rate_default must be positive");
    if (manifest.bit_depth_default != 8 && manifest.bit_depth_default != 16)
      throw Error(ErrorCode::UnsupportedBitDepth,
                  std::to_string(manifest.bit_depth_default));
    for (const json& jp : doc.at("patients"))
      manifest.patients.push_back(parse_patient(jp));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }

  if (manifest.patients.empty())
    throw Error(ErrorCode::ParseError, path.string() + ": empty patient list");
  std::set<std::string> ids;
  for (const PatientRecord& rec : manifest.patients)
    if (!ids.insert(rec.id).second)
      throw Error(ErrorCode::DuplicatePatientId, rec.id);
  return manifest;
}

void save_manifest(const CohortManifest& manifest, const std::filesystem::path& path) {
  json doc;
  doc["frame_rate_default"] = manifest.frame_rate_default;
  doc["bit_depth_default"] = manifest.bit_depth_default;
  doc["patients"] = json::array();
  for (const PatientRecord& rec : manifest.patients) {
    json jp;
    jp["id"] = rec.id;
    jp["label"] = rec.label;
    jp["age"] = rec.age;
    jp["sex"] = rec.sex == Sex::Female ? "female" : "male";
    jp["mtici"] = rec.mtici == Mtici::TwoC ? "2c" : "3";
    if (rec.nihss) jp["nihss"] = *rec.nihss;
    if (rec.passes) jp["passes"] = *rec.passes;
    if (rec.race) jp["race"] = *rec.race;
    if (!rec.sequences.empty()) {
      json jseqs = json::object();
      for (auto& [key, ref] : rec.sequences) {
        json jseq;
        jseq["dir"] = ref.dir.generic_string();
        if (ref.frame_rate) jseq["frame_rate"] = *ref.frame_rate;
        if (ref.bit_depth) jseq["bit_depth"] = *ref.bit_depth;
        jseqs[key.str()] = jseq;
      }
      jp["sequences"] = jseqs;
    }
    if (!rec.masks.empty()) {
      json jmasks = json::object();
      for (auto& [key, mask_path] : rec.masks)
        jmasks[key.str()] = mask_path.generic_string();
      jp["masks"] = jmasks;
    }
    doc["patients"].push_back(jp);
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << doc.dump(2) << "\n";
}

FrameStack load_frame_stack(const SequenceRef& ref, const CohortManifest& manifest) {
  std::filesystem::path dir = ref.dir.is_absolute() ? ref.dir : manifest.base_dir / ref.dir;
  if (!std::filesystem::is_directory(dir))
    throw Error(ErrorCode::MissingFile, dir.string());

  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  FrameStack stack;
  stack.frame_rate = ref.frame_rate.value_or(manifest.frame_rate_default);
  int expected_depth = ref.bit_depth.value_or(0);
  for (const auto& file : files) {
    int depth = 0;
    Raster frame = read_pgm(file, depth);
    if (expected_depth == 0) expected_depth = depth;
    if (depth != expected_depth)
      throw Error(ErrorCode::UnsupportedBitDepth,
                  "mixed bit depths in " + dir.string());
    if (!stack.frames.empty() &&
        (frame.width != stack.width() || frame.height != stack.height()))
      throw Error(ErrorCode::DimensionMismatch, file.string());
    stack.frames.push_back(std::move(frame));
  }
  if (stack.frames.empty()) throw Error(ErrorCode::EmptyStack, dir.string());
  stack.bit_depth = expected_depth;
  return stack;
}

std::vector<ValidationIssue> validate_cohort(const CohortManifest& manifest) {
  std::vector<ValidationIssue> issues;
  for (const PatientRecord& rec : manifest.patients) {
    for (const SeqKey& key : kAllSeqKeys) {
      auto seq_it = rec.sequences.find(key);
      if (seq_it == rec.sequences.end()) {
        issues.push_back({rec.id, key.str(), "MissingSequence",
                          "no " + key.str() + " sequence declared"});
        continue;
      }
      auto mask_it = rec.masks.find(key);
      if (mask_it == rec.masks.end()) {
        issues.push_back({rec.id, key.str(), "MissingMaskForSequence",
                          "no mask declared for " + key.str()});
        continue;
      }
      FrameStack stack;
      try {
        stack = load_frame_stack(seq_it->second, manifest);
      } catch (const Error& e) {
        issues.push_back({rec.id, key.str(), error_code_name(e.code()), e.what()});
        continue;
      }
      std::filesystem::path mask_path = mask_it->second.is_absolute()
                                            ? mask_it->second
                                            : manifest.base_dir / mask_it->second;
      try {
        TdtMask mask = read_mask(mask_path);
        if (mask.width != stack.width() || mask.height != stack.height())
          issues.push_back({rec.id, key.str(), "DimensionMismatch",
                            "mask dimensions differ from stack"});
      } catch (const Error& e) {
        issues.push_back({rec.id, key.str(), error_code_name(e.code()), e.what()});
      }
    }
  }
  return issues;
}

}  // namespace nrp
