#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nrp/features.hpp"
#include "nrp/gbm.hpp"
#include "nrp/stats.hpp"
#include "nrp/synth.hpp"

namespace nrp {

// ---------------------------------------------------------------------------
// Clinical encoding

struct ClinicalStats {
  double age_mean = 0.0;
  double age_sd = 0.0;  // sample (n-1) standard deviation
  bool zero_variance = false;
};

ClinicalStats clinical_stats(const std::vector<PatientRecord>& training);

/// [age z-score, sex (female=0, male=1), mTICI (2c=0, 3=1)]
std::vector<double> encode_clinical(const ClinicalStats& stats, const PatientRecord& target);
std::vector<double> encode_clinical(const std::vector<PatientRecord>& training,
                                    const PatientRecord& target);

inline const std::vector<std::string> kClinicalFeatureNames = {"cln.age", "cln.sex", "cln.mtici"};

// ---------------------------------------------------------------------------
// Evaluation report

struct FoldPrediction {
  std::string patient_id;
  int true_label = 0;
  double score = 0.5;  // strictly in (0,1)
  std::map<std::string, double> view_scores;  // present for view ensembles
};

struct ClinicalFoldStats {
  std::string held_out_id;
  double age_mean = 0.0;
  double age_sd = 0.0;
  bool zero_variance = false;
};

struct ReportMetrics {
  double auroc = 0.5;
  double threshold = 0.5;
  stats::ConfusionCounts counts;
  stats::ConfusionMetrics values;
};

struct EvaluationReport {
  int schema_version = 1;
  std::string config_desc;
  std::vector<FoldPrediction> folds;
  ReportMetrics metrics;
  std::optional<stats::TestResult> p_vs_baseline;
  std::vector<ClinicalFoldStats> fold_stats;  // populated when CLN is used
  std::map<std::string, double> importances;  // mean over folds, sums to ~1
  std::vector<std::string> fold_errors;       // e.g. single-class training folds
};

ReportMetrics metrics_from_folds(const std::vector<FoldPrediction>& folds, double threshold);

void write_report(const EvaluationReport& report, const std::filesystem::path& path);
EvaluationReport read_report(const std::filesystem::path& path);
void write_fold_csv(const std::vector<FoldPrediction>& folds, const std::filesystem::path& path);
std::vector<FoldPrediction> read_fold_csv(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// LOOCV harness

struct LoocvOptions {
  double threshold = 0.5;
  int jobs = 1;
  double window_seconds = 5.0;
  bool concat_views = false;  // concatenate view features instead of ensembling
};

/// Leave-one-out cross-validation over a signal cohort. With two views and
/// TS/RAW groups, trains one model per view and averages probabilities;
/// clinical z-scoring uses training-fold statistics only.
EvaluationReport loocv(const SignalCohort& cohort, const FeatureConfig& feature_cfg,
                       const GbmConfig& gbm_cfg, const LoocvOptions& opts = {});

/// LOOCV over precomputed per-patient time-series feature rows (single
/// model, no view handling). Used by grid cells and synthetic experiments.
EvaluationReport loocv_matrix(const std::vector<FeatureVector>& ts_rows,
                              const std::vector<PatientRecord>& records, bool use_cln,
                              const GbmConfig& gbm_cfg, const LoocvOptions& opts = {});

/// Per-patient mean of per-view scores; patient sets must match.
std::vector<FoldPrediction> ensemble_views(
    const std::map<View, std::vector<FoldPrediction>>& view_folds);

/// One-sided Wilcoxon signed-rank on paired per-patient absolute prediction
/// errors, alternative "candidate errors smaller". Complete ties surface as
/// p = 1.0 with the degenerate flag set.
stats::TestResult compare_to_baseline(const EvaluationReport& candidate,
                                      const EvaluationReport& baseline);

// ---------------------------------------------------------------------------
// Grids and screens

struct AblationCell {
  std::string feature_set;
  std::string mode;  // empty for feature-set rows
  std::optional<double> auroc;
  std::string error;  // per-cell failure, grid keeps going
  bool best_in_row = false;
};

struct AblationGrids {
  bool feature_sets = true;  // CLN / RAW / TSF and combinations (7 rows)
  bool group_modes = true;   // {PEAK,SIPS,FLOW} x {combination,post,pre} (21 cells)
};

struct AblationResult {
  std::vector<AblationCell> feature_set_rows;
  std::vector<AblationCell> group_mode_cells;
};

AblationResult ablation_grid(const SignalCohort& cohort, const AblationGrids& grids,
                             const FeatureConfig& base_cfg, const GbmConfig& gbm_cfg,
                             const LoocvOptions& opts = {});

struct SubgroupRow {
  std::string partition;
  size_t n = 0;
  std::optional<double> auroc;
  stats::ConfusionCounts counts;
  stats::ConfusionMetrics metrics;
};

struct SubgroupPair {
  std::string name;
  std::optional<double> p_label0;  // two-sided MWU on scores, reflow stratum
  std::optional<double> p_label1;  // no-reflow stratum
};

struct SubgroupTable {
  std::vector<SubgroupRow> rows;
  std::vector<SubgroupPair> pairs;
  std::vector<std::string> skipped;  // subgroups lacking their covariate
  double age_median = 0.0;
  std::optional<double> nihss_median;
};

SubgroupTable subgroup_analysis(const EvaluationReport& report,
                                const std::vector<PatientRecord>& records);

struct DirectionRegistry {
  std::map<std::string, stats::Alternative> directions;  // keyed by group.feature
  static DirectionRegistry defaults();
  stats::Alternative lookup(const std::string& feature_name) const;
};

struct UnivariateRow {
  std::string feature;
  stats::Alternative direction;
  double p_value = 1.0;
  double median_positive = 0.0;
  double median_negative = 0.0;
};

std::vector<UnivariateRow> univariate_screen(const std::vector<FeatureVector>& rows,
                                             const std::vector<int>& labels,
                                             const DirectionRegistry& registry =
                                                 DirectionRegistry::defaults());

// ---------------------------------------------------------------------------
// Cohort summary (demographic comparison tables)

struct SummaryRow {
  std::string variable;
  std::string kind;  // "continuous" or "categorical"
  double median_reflow = 0.0, iqr_lo_reflow = 0.0, iqr_hi_reflow = 0.0;
  double median_noreflow = 0.0, iqr_lo_noreflow = 0.0, iqr_hi_noreflow = 0.0;
  long count_reflow = 0, count_noreflow = 0;  // categorical positives
  std::optional<double> p_value;
  std::string test;  // "mann_whitney" or "fisher_exact"
};

std::vector<SummaryRow> summarize_cohort(const std::vector<PatientRecord>& records);

/// Loads every referenced frame stack and mask and extracts the masked mean
/// series for each (phase, view) of each patient.
SignalCohort load_signal_cohort(const CohortManifest& manifest);

// Aligns every signal of every patient (onset + truncation) and extracts the
// configured time-series features. Deterministic order follows the cohort.
std::vector<FeatureVector> extract_cohort_features(const SignalCohort& cohort,
                                                   const FeatureConfig& cfg,
                                                   double window_seconds = 5.0);

}  // namespace nrp
