#include "nrp/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace nrp {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Clinical encoding

ClinicalStats clinical_stats(const std::vector<PatientRecord>& training) {
  if (training.empty()) throw Error(ErrorCode::EmptySample, "empty training list");
  ClinicalStats st;
  double sum = 0.0;
  for (const PatientRecord& rec : training) sum += rec.age;
  st.age_mean = sum / static_cast<double>(training.size());
  if (training.size() < 2) {
    st.age_sd = 0.0;
    st.zero_variance = true;
    return st;
  }
  double acc = 0.0;
  for (const PatientRecord& rec : training)
    acc += (rec.age - st.age_mean) * (rec.age - st.age_mean);
  st.age_sd = std::sqrt(acc / static_cast<double>(training.size() - 1));
  st.zero_variance = st.age_sd == 0.0;
  return st;
}

std::vector<double> encode_clinical(const ClinicalStats& stats, const PatientRecord& target) {
  double z = stats.zero_variance ? 0.0 : (target.age - stats.age_mean) / stats.age_sd;
  return {z, target.sex == Sex::Male ? 1.0 : 0.0, target.mtici == Mtici::Three ? 1.0 : 0.0};
}

std::vector<double> encode_clinical(const std::vector<PatientRecord>& training,
                                    const PatientRecord& target) {
  return encode_clinical(clinical_stats(training), target);
}

// ---------------------------------------------------------------------------
// Metrics and serialization

ReportMetrics metrics_from_folds(const std::vector<FoldPrediction>& folds, double threshold) {
  std::vector<double> scores;
  std::vector<int> labels;
  for (const FoldPrediction& f : folds) {
    scores.push_back(f.score);
    labels.push_back(f.true_label);
  }
  ReportMetrics m;
  m.threshold = threshold;
  m.auroc = stats::auroc(scores, labels);
  for (const FoldPrediction& f : folds) {
    bool predicted = f.score >= threshold;
    if (f.true_label == 1)
      (predicted ? m.counts.tp : m.counts.fn)++;
    else
      (predicted ? m.counts.fp : m.counts.tn)++;
  }
  m.values = stats::confusion_metrics(m.counts);
  return m;
}

namespace {

json metrics_to_json(const ReportMetrics& m) {
  json j;
  j["auroc"] = m.auroc;
  j["threshold"] = m.threshold;
  j["counts"] = {{"tp", m.counts.tp}, {"fp", m.counts.fp}, {"tn", m.counts.tn}, {"fn", m.counts.fn}};
  auto put = [&](const char* name, const std::optional<double>& v) {
    if (v)
      j[name] = *v;
    else
      j[name] = nullptr;
  };
  put("accuracy", m.values.accuracy);
  put("recall", m.values.recall);
  put("specificity", m.values.specificity);
  put("precision", m.values.precision);
  put("f1", m.values.f1);
  return j;
}

json test_result_to_json(const stats::TestResult& t) {
  return {{"statistic", t.statistic},
          {"p_value", t.p_value},
          {"method", t.method == stats::Method::Exact ? "exact" : "normal_approx"},
          {"alternative", stats::alternative_name(t.alternative)},
          {"degenerate", t.degenerate}};
}

}  // namespace

void write_report(const EvaluationReport& report, const std::filesystem::path& path) {
  json doc;
  doc["schema_version"] = report.schema_version;
  doc["config"] = report.config_desc;
  doc["folds"] = json::array();
  for (const FoldPrediction& f : report.folds) {
    json jf;
    jf["patient_id"] = f.patient_id;
    jf["true_label"] = f.true_label;
    jf["score"] = f.score;
    if (!f.view_scores.empty()) jf["view_scores"] = f.view_scores;
    doc["folds"].push_back(jf);
  }
  doc["metrics"] = metrics_to_json(report.metrics);
  if (report.p_vs_baseline) doc["p_vs_baseline"] = test_result_to_json(*report.p_vs_baseline);
  if (!report.fold_stats.empty()) {
    doc["fold_stats"] = json::array();
    for (const ClinicalFoldStats& fs : report.fold_stats)
      doc["fold_stats"].push_back({{"held_out_id", fs.held_out_id},
                                   {"age_mean", fs.age_mean},
                                   {"age_sd", fs.age_sd},
                                   {"zero_variance", fs.zero_variance}});
  }
  if (!report.importances.empty()) doc["importances"] = report.importances;
  if (!report.fold_errors.empty()) doc["fold_errors"] = report.fold_errors;
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << doc.dump(2) << "\n";
}

EvaluationReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  EvaluationReport report;
  report.schema_version = doc.at("schema_version").get<int>();
  report.config_desc = doc.value("config", "");
  for (const json& jf : doc.at("folds")) {
    FoldPrediction f;
    f.patient_id = jf.at("patient_id").get<std::string>();
    f.true_label = jf.at("true_label").get<int>();
    f.score = jf.at("score").get<double>();
    if (jf.contains("view_scores"))
      f.view_scores = jf["view_scores"].get<std::map<std::string, double>>();
    report.folds.push_back(std::move(f));
  }
  const json& jm = doc.at("metrics");
  report.metrics.auroc = jm.at("auroc").get<double>();
  report.metrics.threshold = jm.at("threshold").get<double>();
  report.metrics.counts = {jm["counts"]["tp"].get<long>(), jm["counts"]["fp"].get<long>(),
                           jm["counts"]["tn"].get<long>(), jm["counts"]["fn"].get<long>()};
  auto get_opt = [&](const char* name) -> std::optional<double> {
    if (!jm.contains(name) || jm[name].is_null()) return std::nullopt;
    return jm[name].get<double>();
  };
  report.metrics.values.accuracy = get_opt("accuracy");
  report.metrics.values.recall = get_opt("recall");
  report.metrics.values.specificity = get_opt("specificity");
  report.metrics.values.precision = get_opt("precision");
  report.metrics.values.f1 = get_opt("f1");
  if (doc.contains("importances"))
    report.importances = doc["importances"].get<std::map<std::string, double>>();
  return report;
}

void write_fold_csv(const std::vector<FoldPrediction>& folds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  std::vector<std::string> view_cols;
  if (!folds.empty())
    for (const auto& [view, score] : folds.front().view_scores) view_cols.push_back(view);
  out << "patient_id,true_label,score";
  for (const std::string& v : view_cols) out << ",score_" << v;
  out << "\n";
  char buf[40];
  for (const FoldPrediction& f : folds) {
    std::snprintf(buf, sizeof(buf), "%.17g", f.score);
    out << f.patient_id << "," << f.true_label << "," << buf;
    for (const std::string& v : view_cols) {
      std::snprintf(buf, sizeof(buf), "%.17g", f.view_scores.at(v));
      out << "," << buf;
    }
    out << "\n";
  }
}

std::vector<FoldPrediction> read_fold_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "empty CSV");
  std::vector<std::string> view_cols;
  {
    std::stringstream ss(line);
    std::string cell;
    int col = 0;
    while (std::getline(ss, cell, ',')) {
      if (col >= 3) view_cols.push_back(cell.substr(std::string("score_").size()));
      ++col;
    }
  }
  std::vector<FoldPrediction> folds;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    FoldPrediction f;
    std::getline(ss, f.patient_id, ',');
    std::getline(ss, cell, ',');
    f.true_label = std::stoi(cell);
    std::getline(ss, cell, ',');
    f.score = std::strtod(cell.c_str(), nullptr);
    for (const std::string& v : view_cols) {
      std::getline(ss, cell, ',');
      f.view_scores[v] = std::strtod(cell.c_str(), nullptr);
    }
    folds.push_back(std::move(f));
  }
  return folds;
}

// ---------------------------------------------------------------------------
// LOOCV

namespace {

void parallel_for(size_t count, int jobs, const std::function<void(size_t)>& body) {
  int workers = std::max(1, jobs);
  if (workers == 1 || count <= 1) {
    for (size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> threads;
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&, w]() {
      for (size_t i = static_cast<size_t>(w); i < count; i += static_cast<size_t>(workers))
        body(i);
    });
  }
  for (std::thread& t : threads) t.join();
}

// One model trained per sub-spec; per-fold scores averaged.
struct SubModel {
  std::string tag;                      // view name or empty
  std::vector<std::vector<double>> ts;  // per patient, may be 0-wide
  std::vector<std::string> ts_names;
};

constexpr double kScoreEps = 1e-12;

EvaluationReport run_loocv(const std::vector<SubModel>& subs,
                           const std::vector<PatientRecord>& records, bool use_cln,
                           const GbmConfig& gbm_cfg, const LoocvOptions& opts,
                           const std::string& config_desc) {
  const size_t n = records.size();
  if (n < 3) throw Error(ErrorCode::DegenerateConfig, "cohort smaller than 3");
  long n_pos = 0;
  for (const PatientRecord& rec : records) n_pos += rec.label;
  if (n_pos == 0 || n_pos == static_cast<long>(n))
    throw Error(ErrorCode::SingleClass, "cohort has a single class");

  EvaluationReport report;
  report.config_desc = config_desc;
  report.folds.resize(n);
  if (use_cln) report.fold_stats.resize(n);
  std::vector<std::map<std::string, double>> fold_importances(n);
  std::vector<std::string> fold_errors(n);

  parallel_for(n, opts.jobs, [&](size_t held) {
    std::vector<size_t> train_idx;
    for (size_t i = 0; i < n; ++i)
      if (i != held) train_idx.push_back(i);

    std::vector<int> y;
    for (size_t i : train_idx) y.push_back(records[i].label);

    ClinicalStats cln_stats;
    if (use_cln) {
      std::vector<PatientRecord> training;
      for (size_t i : train_idx) training.push_back(records[i]);
      cln_stats = clinical_stats(training);
      report.fold_stats[held] = {records[held].id, cln_stats.age_mean, cln_stats.age_sd,
                                 cln_stats.zero_variance};
    }

    long fold_pos = std::count(y.begin(), y.end(), 1);
    FoldPrediction pred;
    pred.patient_id = records[held].id;
    pred.true_label = records[held].label;
    if (fold_pos == 0 || fold_pos == static_cast<long>(y.size())) {
      // unavoidable single-class training fold: fall back to prevalence
      fold_errors[held] = "SingleClassTrainingInFold:" + records[held].id;
      double prev = static_cast<double>(fold_pos) / static_cast<double>(y.size());
      pred.score = std::clamp(prev, kScoreEps, 1.0 - kScoreEps);
      report.folds[held] = std::move(pred);
      return;
    }

    double score_sum = 0.0;
    for (const SubModel& sub : subs) {
      std::vector<std::vector<double>> X;
      std::vector<std::string> names = sub.ts_names;
      if (use_cln) names.insert(names.end(), kClinicalFeatureNames.begin(),
                                kClinicalFeatureNames.end());
      for (size_t i : train_idx) {
        std::vector<double> row = sub.ts[i];
        if (use_cln) {
          std::vector<double> cln = encode_clinical(cln_stats, records[i]);
          row.insert(row.end(), cln.begin(), cln.end());
        }
        X.push_back(std::move(row));
      }
      GbmModel model = fit_gbm(X, y, gbm_cfg, names);

      std::vector<double> x_test = sub.ts[held];
      if (use_cln) {
        std::vector<double> cln = encode_clinical(cln_stats, records[held]);
        x_test.insert(x_test.end(), cln.begin(), cln.end());
      }
      double s = predict_score(model, x_test);
      score_sum += s;
      if (subs.size() > 1) pred.view_scores[sub.tag] = s;
      for (size_t f = 0; f < names.size(); ++f)
        fold_importances[held][names[f]] += model.importances[f];
    }
    pred.score = std::clamp(score_sum / static_cast<double>(subs.size()), kScoreEps,
                            1.0 - kScoreEps);
    report.folds[held] = std::move(pred);
  });

  for (const std::string& err : fold_errors)
    if (!err.empty()) report.fold_errors.push_back(err);

  double total = 0.0;
  for (const auto& fold : fold_importances)
    for (const auto& [name, imp] : fold) {
      report.importances[name] += imp;
      total += imp;
    }
  if (total > 0.0)
    for (auto& [name, imp] : report.importances) imp /= total;

  report.metrics = metrics_from_folds(report.folds, opts.threshold);
  return report;
}

}  // namespace

SignalCohort load_signal_cohort(const CohortManifest& manifest) {
  SignalCohort cohort;
  for (const PatientRecord& rec : manifest.patients) {
    PatientSignals ps;
    ps.record = rec;
    for (const auto& [key, ref] : rec.sequences) {
      FrameStack stack = load_frame_stack(ref, manifest);
      auto mask_it = rec.masks.find(key);
      if (mask_it == rec.masks.end())
        throw Error(ErrorCode::MissingMaskForSequence, rec.id + "/" + key.str());
      std::filesystem::path mask_path = mask_it->second.is_absolute()
                                            ? mask_it->second
                                            : manifest.base_dir / mask_it->second;
      TdtMask mask = read_mask(mask_path);
      ps.signals[key] = extract_series(stack, mask, key.phase, key.view);
    }
    cohort.patients.push_back(std::move(ps));
  }
  return cohort;
}

std::vector<FeatureVector> extract_cohort_features(const SignalCohort& cohort,
                                                   const FeatureConfig& cfg,
                                                   double window_seconds) {
  std::vector<FeatureVector> rows;
  for (const PatientSignals& ps : cohort.patients) {
    std::map<SeqKey, PerfusionSignal> aligned;
    for (const auto& [key, sig] : ps.signals)
      aligned[key] = align_and_truncate(sig, window_seconds, cfg.onset_epsilon);
    rows.push_back(extract_all(aligned, cfg, ps.record.id));
  }
  return rows;
}

EvaluationReport loocv(const SignalCohort& cohort, const FeatureConfig& feature_cfg,
                       const GbmConfig& gbm_cfg, const LoocvOptions& opts) {
  std::vector<PatientRecord> records;
  for (const PatientSignals& ps : cohort.patients) records.push_back(ps.record);

  bool use_cln = feature_cfg.groups.count(FeatureGroup::Cln) > 0;
  bool has_ts = feature_cfg.groups.count(FeatureGroup::Peak) ||
                feature_cfg.groups.count(FeatureGroup::Sips) ||
                feature_cfg.groups.count(FeatureGroup::Flow) ||
                feature_cfg.groups.count(FeatureGroup::Raw);

  std::vector<SubModel> subs;
  if (!has_ts) {
    SubModel sub;
    sub.ts.assign(records.size(), {});
    subs.push_back(std::move(sub));
  } else if (feature_cfg.views.size() > 1 && !opts.concat_views) {
    for (View view : feature_cfg.views) {
      FeatureConfig view_cfg = feature_cfg;
      view_cfg.views = {view};
      SubModel sub;
      sub.tag = view_name(view);
      std::vector<FeatureVector> rows =
          extract_cohort_features(cohort, view_cfg, opts.window_seconds);
      sub.ts_names = rows.front().names;
      for (FeatureVector& fv : rows) sub.ts.push_back(std::move(fv.values));
      subs.push_back(std::move(sub));
    }
  } else {
    SubModel sub;
    std::vector<FeatureVector> rows =
        extract_cohort_features(cohort, feature_cfg, opts.window_seconds);
    sub.ts_names = rows.front().names;
    for (FeatureVector& fv : rows) sub.ts.push_back(std::move(fv.values));
    subs.push_back(std::move(sub));
  }
  return run_loocv(subs, records, use_cln, gbm_cfg, opts, feature_cfg.describe());
}

EvaluationReport loocv_matrix(const std::vector<FeatureVector>& ts_rows,
                              const std::vector<PatientRecord>& records, bool use_cln,
                              const GbmConfig& gbm_cfg, const LoocvOptions& opts) {
  if (ts_rows.size() != records.size())
    throw Error(ErrorCode::PatientSetMismatch, "feature rows vs records");
  SubModel sub;
  if (!ts_rows.empty()) sub.ts_names = ts_rows.front().names;
  for (const FeatureVector& fv : ts_rows) sub.ts.push_back(fv.values);
  return run_loocv({sub}, records, use_cln, gbm_cfg, opts, "matrix");
}

std::vector<FoldPrediction> ensemble_views(
    const std::map<View, std::vector<FoldPrediction>>& view_folds) {
  if (view_folds.empty()) throw Error(ErrorCode::PatientSetMismatch, "no views");
  auto first = view_folds.begin();
  const size_t n = first->second.size();
  for (const auto& [view, folds] : view_folds) {
    if (folds.size() != n) throw Error(ErrorCode::PatientSetMismatch, "fold count differs");
    for (size_t i = 0; i < n; ++i)
      if (folds[i].patient_id != first->second[i].patient_id)
        throw Error(ErrorCode::PatientSetMismatch, folds[i].patient_id);
  }
  std::vector<FoldPrediction> out;
  for (size_t i = 0; i < n; ++i) {
    FoldPrediction f;
    f.patient_id = first->second[i].patient_id;
    f.true_label = first->second[i].true_label;
    double sum = 0.0;
    for (const auto& [view, folds] : view_folds) {
      sum += folds[i].score;
      f.view_scores[view_name(view)] = folds[i].score;
    }
    f.score = sum / static_cast<double>(view_folds.size());
    out.push_back(std::move(f));
  }
  return out;
}

stats::TestResult compare_to_baseline(const EvaluationReport& candidate,
                                      const EvaluationReport& baseline) {
  std::map<std::string, const FoldPrediction*> base_by_id;
  for (const FoldPrediction& f : baseline.folds) base_by_id[f.patient_id] = &f;
  if (base_by_id.size() != candidate.folds.size())
    throw Error(ErrorCode::PatientSetMismatch, "fold counts differ");

  std::vector<double> diffs;
  for (const FoldPrediction& f : candidate.folds) {
    auto it = base_by_id.find(f.patient_id);
    if (it == base_by_id.end()) throw Error(ErrorCode::PatientSetMismatch, f.patient_id);
    double y = static_cast<double>(f.true_label);
    double err_cand = std::abs(y - f.score);
    double err_base = std::abs(y - it->second->score);
    diffs.push_back(err_base - err_cand);
  }
  try {
    return stats::wilcoxon_signed_rank(diffs, stats::Alternative::Greater);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::AllZeroDifferences) throw;
    stats::TestResult tied;
    tied.statistic = 0.0;
    tied.p_value = 1.0;
    tied.method = stats::Method::Exact;
    tied.alternative = stats::Alternative::Greater;
    tied.degenerate = true;
    return tied;
  }
}

// ---------------------------------------------------------------------------
// Ablation grids

namespace {

std::optional<double> cell_auroc(const SignalCohort& cohort, const FeatureConfig& cfg,
                                 const GbmConfig& gbm_cfg, const LoocvOptions& opts,
                                 std::string& error_out) {
  try {
    return loocv(cohort, cfg, gbm_cfg, opts).metrics.auroc;
  } catch (const std::exception& e) {
    error_out = e.what();
    return std::nullopt;
  }
}

}  // namespace

AblationResult ablation_grid(const SignalCohort& cohort, const AblationGrids& grids,
                             const FeatureConfig& base_cfg, const GbmConfig& gbm_cfg,
                             const LoocvOptions& opts) {
  if (!grids.feature_sets && !grids.group_modes)
    throw Error(ErrorCode::EmptyGrid, "no grids requested");

  AblationResult result;
  using G = FeatureGroup;
  const std::set<G> kTsf = {G::Sips, G::Flow};  // selected TSF configuration

  if (grids.feature_sets) {
    struct RowSpec {
      const char* name;
      bool cln, raw, tsf;
    };
    const RowSpec rows[] = {
        {"CLN", true, false, false},         {"RAW", false, true, false},
        {"TSF", false, false, true},         {"CLN+RAW", true, true, false},
        {"CLN+TSF", true, false, true},      {"TSF+RAW", false, true, true},
        {"CLN+TSF+RAW", true, true, true},
    };
    for (const RowSpec& spec : rows) {
      FeatureConfig cfg = base_cfg;
      cfg.mode = FeatureMode::PostOnly;
      cfg.groups.clear();
      if (spec.cln) cfg.groups.insert(G::Cln);
      if (spec.raw) cfg.groups.insert(G::Raw);
      if (spec.tsf) cfg.groups.insert(kTsf.begin(), kTsf.end());
      AblationCell cell;
      cell.feature_set = spec.name;
      cell.auroc = cell_auroc(cohort, cfg, gbm_cfg, opts, cell.error);
      result.feature_set_rows.push_back(std::move(cell));
    }
    // mark the best-performing feature set
    double best = -1.0;
    size_t best_i = 0;
    for (size_t i = 0; i < result.feature_set_rows.size(); ++i)
      if (result.feature_set_rows[i].auroc && *result.feature_set_rows[i].auroc > best) {
        best = *result.feature_set_rows[i].auroc;
        best_i = i;
      }
    if (best >= 0.0) result.feature_set_rows[best_i].best_in_row = true;
  }

  if (grids.group_modes) {
    const std::pair<const char*, std::set<G>> rows[] = {
        {"PEAK", {G::Peak}},
        {"SIPS", {G::Sips}},
        {"FLOW", {G::Flow}},
        {"PEAK+SIPS", {G::Peak, G::Sips}},
        {"PEAK+FLOW", {G::Peak, G::Flow}},
        {"SIPS+FLOW", {G::Sips, G::Flow}},
        {"PEAK+SIPS+FLOW", {G::Peak, G::Sips, G::Flow}},
    };
    const FeatureMode modes[] = {FeatureMode::Combination, FeatureMode::PostOnly,
                                 FeatureMode::PreOnly};
    for (const auto& [row_name, groups] : rows) {
      size_t row_start = result.group_mode_cells.size();
      for (FeatureMode mode : modes) {
        FeatureConfig cfg = base_cfg;
        cfg.mode = mode;
        cfg.groups = groups;
        AblationCell cell;
        cell.feature_set = row_name;
        cell.mode = feature_mode_name(mode);
        cell.auroc = cell_auroc(cohort, cfg, gbm_cfg, opts, cell.error);
        result.group_mode_cells.push_back(std::move(cell));
      }
      double best = -1.0;
      size_t best_i = row_start;
      for (size_t i = row_start; i < result.group_mode_cells.size(); ++i)
        if (result.group_mode_cells[i].auroc && *result.group_mode_cells[i].auroc > best) {
          best = *result.group_mode_cells[i].auroc;
          best_i = i;
        }
      if (best >= 0.0) result.group_mode_cells[best_i].best_in_row = true;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Subgroup analysis

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double quantile_of(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  double pos = q * static_cast<double>(v.size() - 1);
  size_t lo = static_cast<size_t>(std::floor(pos));
  size_t hi = std::min(lo + 1, v.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

SubgroupRow make_subgroup_row(const std::string& name,
                              const std::vector<const FoldPrediction*>& members,
                              double threshold) {
  SubgroupRow row;
  row.partition = name;
  row.n = members.size();
  std::vector<double> scores;
  std::vector<int> labels;
  for (const FoldPrediction* f : members) {
    scores.push_back(f->score);
    labels.push_back(f->true_label);
    bool predicted = f->score >= threshold;
    if (f->true_label == 1)
      (predicted ? row.counts.tp : row.counts.fn)++;
    else
      (predicted ? row.counts.fp : row.counts.tn)++;
  }
  if (!members.empty()) row.metrics = stats::confusion_metrics(row.counts);
  try {
    row.auroc = stats::auroc(scores, labels);
  } catch (const Error&) {
    row.auroc = std::nullopt;  // single class in subgroup
  }
  return row;
}

std::optional<double> stratum_mwu(const std::vector<const FoldPrediction*>& a,
                                  const std::vector<const FoldPrediction*>& b, int label) {
  std::vector<double> sa, sb;
  for (const FoldPrediction* f : a)
    if (f->true_label == label) sa.push_back(f->score);
  for (const FoldPrediction* f : b)
    if (f->true_label == label) sb.push_back(f->score);
  if (sa.empty() || sb.empty()) return std::nullopt;
  return stats::mann_whitney_u(sa, sb, stats::Alternative::TwoSided).p_value;
}

}  // namespace

SubgroupTable subgroup_analysis(const EvaluationReport& report,
                                const std::vector<PatientRecord>& records) {
  std::map<std::string, const PatientRecord*> rec_by_id;
  for (const PatientRecord& rec : records) rec_by_id[rec.id] = &rec;
  for (const FoldPrediction& f : report.folds)
    if (!rec_by_id.count(f.patient_id))
      throw Error(ErrorCode::PatientSetMismatch, f.patient_id);

  SubgroupTable table;
  std::vector<double> ages;
  for (const FoldPrediction& f : report.folds) ages.push_back(rec_by_id.at(f.patient_id)->age);
  table.age_median = median_of(ages);
  {
    std::vector<double> nihss;
    for (const FoldPrediction& f : report.folds)
      if (auto v = rec_by_id.at(f.patient_id)->nihss) nihss.push_back(static_cast<double>(*v));
    if (!nihss.empty()) table.nihss_median = median_of(nihss);
  }

  // Each dimension yields two partitions; nullopt membership = covariate missing.
  struct Dimension {
    std::string name;
    std::string label_a, label_b;
    std::function<std::optional<bool>(const PatientRecord&)> in_a;
  };
  double age_median = table.age_median;
  std::optional<double> nihss_median = table.nihss_median;
  std::vector<Dimension> dims = {
      {"mtici", "mtici=2c", "mtici=3",
       [](const PatientRecord& r) -> std::optional<bool> { return r.mtici == Mtici::TwoC; }},
      {"sex", "sex=female", "sex=male",
       [](const PatientRecord& r) -> std::optional<bool> { return r.sex == Sex::Female; }},
      {"race", "race=white", "race=other",
       [](const PatientRecord& r) -> std::optional<bool> {
         if (!r.race) return std::nullopt;
         std::string lowered;
         for (char c : *r.race) lowered.push_back(static_cast<char>(std::tolower(c)));
         return lowered == "white";
       }},
      {"age", "age>median", "age<=median",
       [age_median](const PatientRecord& r) -> std::optional<bool> {
         return r.age > age_median;
       }},
      {"nihss", "nihss>median", "nihss<=median",
       [nihss_median](const PatientRecord& r) -> std::optional<bool> {
         if (!r.nihss || !nihss_median) return std::nullopt;
         return static_cast<double>(*r.nihss) > *nihss_median;
       }},
      {"passes", "passes=1", "passes>1",
       [](const PatientRecord& r) -> std::optional<bool> {
         if (!r.passes) return std::nullopt;
         return *r.passes == 1;
       }},
  };

  for (const Dimension& dim : dims) {
    std::vector<const FoldPrediction*> group_a, group_b;
    size_t with_covariate = 0;
    for (const FoldPrediction& f : report.folds) {
      std::optional<bool> in_a = dim.in_a(*rec_by_id.at(f.patient_id));
      if (!in_a) continue;
      ++with_covariate;
      (*in_a ? group_a : group_b).push_back(&f);
    }
    if (with_covariate == 0) {
      table.skipped.push_back(dim.name);
      continue;
    }
    table.rows.push_back(make_subgroup_row(dim.label_a, group_a, report.metrics.threshold));
    table.rows.push_back(make_subgroup_row(dim.label_b, group_b, report.metrics.threshold));
    SubgroupPair pair;
    pair.name = dim.name;
    pair.p_label0 = stratum_mwu(group_a, group_b, 0);
    pair.p_label1 = stratum_mwu(group_a, group_b, 1);
    table.pairs.push_back(std::move(pair));
  }
  return table;
}

// ---------------------------------------------------------------------------
// Univariate screen

DirectionRegistry DirectionRegistry::defaults() {
  using A = stats::Alternative;
  DirectionRegistry reg;
  reg.directions = {
      {"peak.peakHeight", A::Greater},     {"peak.peakWidth", A::Greater},
      {"peak.peakRatio", A::Greater},      {"peak.peakSlope", A::Greater},
      {"sips.meanIntensity", A::Greater},  {"sips.stdDevIntensity", A::Greater},
      {"sips.minIntensity", A::Greater},   {"sips.meanIntensityRatio", A::Greater},
      {"sips.skewness", A::Greater},       {"sips.kurtosis", A::Greater},
      {"flow.timeTo50Max", A::Greater},    {"flow.timeToPeak", A::Greater},
      {"flow.decayTime", A::Less},         {"flow.plateauDuration", A::Greater},
      {"flow.signalCorrelation", A::Less},
  };
  return reg;
}

stats::Alternative DirectionRegistry::lookup(const std::string& feature_name) const {
  // match on the trailing "group.feature" part of a qualified name
  size_t last = feature_name.rfind('.');
  if (last != std::string::npos) {
    size_t prev = feature_name.rfind('.', last - 1);
    std::string key = prev == std::string::npos ? feature_name : feature_name.substr(prev + 1);
    auto it = directions.find(key);
    if (it != directions.end()) return it->second;
  }
  auto it = directions.find(feature_name);
  if (it != directions.end()) return it->second;
  return stats::Alternative::TwoSided;
}

std::vector<UnivariateRow> univariate_screen(const std::vector<FeatureVector>& rows,
                                             const std::vector<int>& labels,
                                             const DirectionRegistry& registry) {
  if (rows.size() != labels.size())
    throw Error(ErrorCode::PatientSetMismatch, "rows vs labels");
  long n_pos = std::count(labels.begin(), labels.end(), 1);
  if (n_pos == 0 || n_pos == static_cast<long>(labels.size()))
    throw Error(ErrorCode::EmptyClass, "need at least one patient per class");

  std::vector<UnivariateRow> table;
  if (rows.empty()) return table;
  const std::vector<std::string>& names = rows.front().names;
  for (size_t f = 0; f < names.size(); ++f) {
    std::vector<double> pos, neg;
    for (size_t i = 0; i < rows.size(); ++i)
      (labels[i] == 1 ? pos : neg).push_back(rows[i].values[f]);
    UnivariateRow row;
    row.feature = names[f];
    row.direction = registry.lookup(names[f]);
    row.p_value = stats::mann_whitney_u(pos, neg, row.direction).p_value;
    row.median_positive = median_of(pos);
    row.median_negative = median_of(neg);
    table.push_back(std::move(row));
  }
  return table;
}

// ---------------------------------------------------------------------------
// Cohort summary

std::vector<SummaryRow> summarize_cohort(const std::vector<PatientRecord>& records) {
  std::vector<SummaryRow> rows;
  std::vector<const PatientRecord*> reflow, noreflow;
  for (const PatientRecord& rec : records)
    (rec.label == 1 ? noreflow : reflow).push_back(&rec);

  auto continuous = [&](const std::string& name,
                        const std::function<std::optional<double>(const PatientRecord&)>& get) {
    std::vector<double> a, b;  // a = reflow, b = no-reflow
    for (const PatientRecord* r : reflow)
      if (auto v = get(*r)) a.push_back(*v);
    for (const PatientRecord* r : noreflow)
      if (auto v = get(*r)) b.push_back(*v);
    if (a.empty() || b.empty()) return;
    SummaryRow row;
    row.variable = name;
    row.kind = "continuous";
    row.median_reflow = median_of(a);
    row.iqr_lo_reflow = quantile_of(a, 0.25);
    row.iqr_hi_reflow = quantile_of(a, 0.75);
    row.median_noreflow = median_of(b);
    row.iqr_lo_noreflow = quantile_of(b, 0.25);
    row.iqr_hi_noreflow = quantile_of(b, 0.75);
    row.test = "mann_whitney";
    row.p_value = stats::mann_whitney_u(b, a, stats::Alternative::TwoSided).p_value;
    rows.push_back(std::move(row));
  };

  auto categorical = [&](const std::string& name,
                         const std::function<std::optional<bool>(const PatientRecord&)>& pred) {
    long a = 0, b = 0, c = 0, d = 0;  // [reflow yes/no], [noreflow yes/no]
    for (const PatientRecord* r : reflow) {
      auto v = pred(*r);
      if (!v) continue;
      (*v ? a : b)++;
    }
    for (const PatientRecord* r : noreflow) {
      auto v = pred(*r);
      if (!v) continue;
      (*v ? c : d)++;
    }
    if (a + b == 0 || c + d == 0) return;
    SummaryRow row;
    row.variable = name;
    row.kind = "categorical";
    row.count_reflow = a;
    row.count_noreflow = c;
    row.test = "fisher_exact";
    row.p_value = stats::fisher_exact({{{a, b}, {c, d}}}).p_value;
    rows.push_back(std::move(row));
  };

  continuous("age", [](const PatientRecord& r) -> std::optional<double> { return r.age; });
  continuous("nihss", [](const PatientRecord& r) -> std::optional<double> {
    if (!r.nihss) return std::nullopt;
    return static_cast<double>(*r.nihss);
  });
  categorical("sex=male", [](const PatientRecord& r) -> std::optional<bool> {
    return r.sex == Sex::Male;
  });
  categorical("mtici=2c", [](const PatientRecord& r) -> std::optional<bool> {
    return r.mtici == Mtici::TwoC;
  });
  categorical("race=white", [](const PatientRecord& r) -> std::optional<bool> {
    if (!r.race) return std::nullopt;
    std::string lowered;
    for (char ch : *r.race) lowered.push_back(static_cast<char>(std::tolower(ch)));
    return lowered == "white";
  });
  categorical("passes=1", [](const PatientRecord& r) -> std::optional<bool> {
    if (!r.passes) return std::nullopt;
    return *r.passes == 1;
  });
  return rows;
}

}  // namespace nrp
