#include <unistd.h>

#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "nrp/pipeline.hpp"

using namespace nrp;
namespace fs = std::filesystem;

namespace {

PatientRecord rec(const std::string& id, int label, double age, Sex sex = Sex::Female,
                  Mtici mtici = Mtici::TwoC) {
  PatientRecord r;
  r.id = id;
  r.label = label;
  r.age = age;
  r.sex = sex;
  r.mtici = mtici;
  return r;
}

FoldPrediction fold(const std::string& id, int label, double score) {
  FoldPrediction f;
  f.patient_id = id;
  f.true_label = label;
  f.score = score;
  return f;
}

SignalCohort tiny_cohort(int n, double prevalence, int seed) {
  SynthConfig cfg;
  cfg.n_patients = n;
  cfg.prevalence = prevalence;
  cfg.seed = seed;
  return generate_cohort(cfg);
}

}  // namespace

TEST_CASE("clinical encoding standardizes age with training statistics") {
  std::vector<PatientRecord> training = {rec("a", 0, 60.0), rec("b", 0, 70.0),
                                         rec("c", 1, 80.0)};
  ClinicalStats st = clinical_stats(training);
  CHECK(st.age_mean == doctest::Approx(70.0));
  CHECK(st.age_sd == doctest::Approx(10.0));  // sample (n-1) sd
  CHECK_FALSE(st.zero_variance);

  std::vector<double> enc = encode_clinical(st, rec("t", 1, 80.0, Sex::Male, Mtici::Three));
  REQUIRE(enc.size() == 3);
  CHECK(enc[0] == doctest::Approx(1.0));
  CHECK(enc[1] == doctest::Approx(1.0));
  CHECK(enc[2] == doctest::Approx(1.0));
  std::vector<double> enc2 = encode_clinical(training, rec("t", 1, 70.0));
  CHECK(enc2 == std::vector<double>{0.0, 0.0, 0.0});

  // all-equal ages: z-scores collapse to zero instead of dividing by zero
  std::vector<PatientRecord> flat = {rec("a", 0, 70.0), rec("b", 1, 70.0)};
  ClinicalStats fs_ = clinical_stats(flat);
  CHECK(fs_.zero_variance);
  CHECK(encode_clinical(fs_, rec("t", 0, 99.0))[0] == doctest::Approx(0.0));

  CHECK_THROWS_AS(clinical_stats({}), Error);
}

TEST_CASE("metrics derive from fold predictions") {
  std::vector<FoldPrediction> folds = {
      fold("p1", 1, 0.9), fold("p2", 1, 0.6), fold("p3", 0, 0.7),
      fold("p4", 0, 0.2), fold("p5", 0, 0.4), fold("p6", 1, 0.3),
  };
  ReportMetrics m = metrics_from_folds(folds, 0.5);
  CHECK(m.counts.tp == 2);
  CHECK(m.counts.fn == 1);
  CHECK(m.counts.fp == 1);
  CHECK(m.counts.tn == 2);
  CHECK(m.auroc == doctest::Approx(stats::auroc({0.9, 0.6, 0.7, 0.2, 0.4, 0.3},
                                                {1, 1, 0, 0, 0, 1})));
  CHECK(*m.values.accuracy == doctest::Approx(4.0 / 6.0));
  // threshold is inclusive
  ReportMetrics m2 = metrics_from_folds({fold("p1", 1, 0.5), fold("p2", 0, 0.4)}, 0.5);
  CHECK(m2.counts.tp == 1);
  CHECK(m2.counts.tn == 1);
}

TEST_CASE("report JSON and fold CSV round-trip") {
  EvaluationReport report;
  report.config_desc = "cfg";
  report.folds = {fold("p1", 1, 0.875), fold("p2", 0, 1.0 / 3.0)};
  report.folds[0].view_scores = {{"ap", 0.75}, {"lateral", 1.0}};
  report.folds[1].view_scores = {{"ap", 0.5}, {"lateral", 1.0 / 6.0}};
  report.metrics = metrics_from_folds(report.folds, 0.5);
  report.importances = {{"f1", 0.25}, {"f2", 0.75}};

  fs::path dir = fs::temp_directory_path();
  fs::path jpath = dir / ("nrp_test_report_" + std::to_string(::getpid()) + ".json");
  write_report(report, jpath);
  EvaluationReport back = read_report(jpath);
  CHECK(back.schema_version == 1);
  CHECK(back.config_desc == "cfg");
  REQUIRE(back.folds.size() == 2);
  CHECK(back.folds[0].patient_id == "p1");
  CHECK(back.folds[0].score == report.folds[0].score);
  CHECK(back.folds[1].view_scores.at("lateral") == doctest::Approx(1.0 / 6.0));
  CHECK(back.metrics.auroc == report.metrics.auroc);
  CHECK(back.metrics.counts.tp == report.metrics.counts.tp);
  CHECK(back.importances == report.importances);
  fs::remove(jpath);

  fs::path cpath = dir / ("nrp_test_folds_" + std::to_string(::getpid()) + ".csv");
  write_fold_csv(report.folds, cpath);
  std::vector<FoldPrediction> cback = read_fold_csv(cpath);
  REQUIRE(cback.size() == 2);
  for (size_t i = 0; i < 2; ++i) {
    CHECK(cback[i].patient_id == report.folds[i].patient_id);
    CHECK(cback[i].true_label == report.folds[i].true_label);
    CHECK(cback[i].score == report.folds[i].score);  // bit-exact
    CHECK(cback[i].view_scores == report.folds[i].view_scores);
  }
  fs::remove(cpath);
}

TEST_CASE("view ensembling averages per-patient scores") {
  std::map<View, std::vector<FoldPrediction>> views;
  views[View::Ap] = {fold("p1", 1, 0.8), fold("p2", 0, 0.4)};
  views[View::Lateral] = {fold("p1", 1, 0.6), fold("p2", 0, 0.2)};
  std::vector<FoldPrediction> out = ensemble_views(views);
  REQUIRE(out.size() == 2);
  CHECK(out[0].score == doctest::Approx(0.7));
  CHECK(out[1].score == doctest::Approx(0.3));
  CHECK(out[0].view_scores.at("ap") == doctest::Approx(0.8));
  CHECK(out[0].view_scores.at("lateral") == doctest::Approx(0.6));

  views[View::Lateral][0].patient_id = "px";
  CHECK_THROWS_AS(ensemble_views(views), Error);
  views[View::Lateral] = {fold("p1", 1, 0.6)};
  CHECK_THROWS_AS(ensemble_views(views), Error);
}

TEST_CASE("baseline comparison tests paired absolute errors") {
  EvaluationReport cand, base;
  for (int i = 0; i < 6; ++i) {
    std::string id = "p" + std::to_string(i);
    int label = i % 2;
    cand.folds.push_back(fold(id, label, label == 1 ? 0.9 : 0.1));  // near-perfect
    base.folds.push_back(fold(id, label, 0.5));
  }
  stats::TestResult r = compare_to_baseline(cand, base);
  CHECK(r.alternative == stats::Alternative::Greater);
  CHECK(r.p_value == doctest::Approx(1.0 / 64.0));  // all six improve: 2^-6

  stats::TestResult mirror = compare_to_baseline(base, cand);
  CHECK(mirror.p_value == doctest::Approx(1.0));

  stats::TestResult tie = compare_to_baseline(base, base);
  CHECK(tie.p_value == doctest::Approx(1.0));
  CHECK(tie.degenerate);

  EvaluationReport other = base;
  other.folds[0].patient_id = "zz";
  CHECK_THROWS_AS(compare_to_baseline(cand, other), Error);
}

TEST_CASE("leave-one-out over a feature matrix") {
  // one predictive feature; records carry uninformative clinical data
  std::vector<FeatureVector> rows;
  std::vector<PatientRecord> records;
  for (int i = 0; i < 14; ++i) {
    int label = i < 7 ? 0 : 1;
    FeatureVector fv;
    fv.patient_id = "p" + std::to_string(i);
    fv.names = {"x"};
    fv.values = {label == 1 ? 0.8 + 0.01 * i : 0.2 + 0.01 * i};
    rows.push_back(fv);
    records.push_back(rec(fv.patient_id, label, 60.0 + i));
  }
  EvaluationReport report = loocv_matrix(rows, records, false, {});
  REQUIRE(report.folds.size() == 14);
  CHECK(report.metrics.auroc == doctest::Approx(1.0));
  CHECK(report.fold_stats.empty());
  CHECK(report.fold_errors.empty());
  for (const FoldPrediction& f : report.folds) {
    CHECK(f.score > 0.0);
    CHECK(f.score < 1.0);
  }
  double total_importance = 0.0;
  for (const auto& [name, imp] : report.importances) total_importance += imp;
  CHECK(total_importance == doctest::Approx(1.0));

  CHECK_THROWS_AS(loocv_matrix(rows, std::vector<PatientRecord>(records.begin(),
                                                                records.begin() + 3),
                               false, {}),
                  Error);
}

TEST_CASE("clinical statistics come from the training fold only") {
  std::vector<FeatureVector> rows;
  std::vector<PatientRecord> records;
  for (int i = 0; i < 10; ++i) {
    FeatureVector fv;
    fv.patient_id = "p" + std::to_string(i);
    fv.names = {};
    fv.values = {};
    rows.push_back(fv);
    records.push_back(rec(fv.patient_id, i % 2, 50.0 + 7.0 * i));
  }
  records[4].age = 300.0;  // extreme holdout must not leak into its own fold stats

  EvaluationReport report = loocv_matrix(rows, records, true, {});
  REQUIRE(report.fold_stats.size() == 10);
  for (size_t held = 0; held < 10; ++held) {
    std::vector<PatientRecord> training;
    for (size_t i = 0; i < 10; ++i)
      if (i != held) training.push_back(records[i]);
    ClinicalStats expect = clinical_stats(training);
    CHECK(report.fold_stats[held].held_out_id == records[held].id);
    CHECK(report.fold_stats[held].age_mean == expect.age_mean);  // exact equality
    CHECK(report.fold_stats[held].age_sd == expect.age_sd);
  }
}

TEST_CASE("single-class training folds fall back to prevalence") {
  // one positive: its own fold trains on negatives only
  std::vector<FeatureVector> rows;
  std::vector<PatientRecord> records;
  for (int i = 0; i < 6; ++i) {
    FeatureVector fv;
    fv.patient_id = "p" + std::to_string(i);
    fv.names = {"x"};
    fv.values = {static_cast<double>(i)};
    rows.push_back(fv);
    records.push_back(rec(fv.patient_id, i == 0 ? 1 : 0, 70.0 + i));
  }
  EvaluationReport report = loocv_matrix(rows, records, false, {});
  REQUIRE(report.fold_errors.size() == 1);
  CHECK(report.fold_errors[0].find("p0") != std::string::npos);
  CHECK(report.folds[0].score == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(report.folds[0].score >= 1e-12);
}

TEST_CASE("signal-cohort cross-validation is deterministic across thread counts") {
  SignalCohort cohort = tiny_cohort(12, 0.5, 21);
  FeatureConfig cfg;
  cfg.mode = FeatureMode::PostOnly;
  cfg.groups = {FeatureGroup::Sips, FeatureGroup::Flow};

  LoocvOptions serial;
  LoocvOptions parallel;
  parallel.jobs = 4;
  EvaluationReport a = loocv(cohort, cfg, {}, serial);
  EvaluationReport b = loocv(cohort, cfg, {}, parallel);
  REQUIRE(a.folds.size() == 12);
  REQUIRE(b.folds.size() == 12);
  for (size_t i = 0; i < a.folds.size(); ++i) {
    CHECK(a.folds[i].patient_id == b.folds[i].patient_id);
    CHECK(a.folds[i].score == b.folds[i].score);  // bit-exact
    CHECK(a.folds[i].view_scores == b.folds[i].view_scores);
  }
  CHECK(a.metrics.auroc == b.metrics.auroc);

  // two views -> per-view models with score averaging
  CHECK(a.folds[0].view_scores.count("ap") == 1);
  CHECK(a.folds[0].view_scores.count("lateral") == 1);
  double mean = 0.5 * (a.folds[0].view_scores.at("ap") + a.folds[0].view_scores.at("lateral"));
  CHECK(a.folds[0].score == doctest::Approx(mean).epsilon(1e-12));

  // concatenation trains a single joint model instead
  LoocvOptions concat;
  concat.concat_views = true;
  EvaluationReport c = loocv(cohort, cfg, {}, concat);
  CHECK(c.folds[0].view_scores.empty());
}

TEST_CASE("ablation grids have the expected shape") {
  SignalCohort cohort = tiny_cohort(10, 0.4, 2);
  AblationResult result = ablation_grid(cohort, {}, {}, {});
  REQUIRE(result.feature_set_rows.size() == 7);
  REQUIRE(result.group_mode_cells.size() == 21);

  std::vector<std::string> row_names;
  for (const AblationCell& cell : result.feature_set_rows) {
    row_names.push_back(cell.feature_set);
    CHECK(cell.mode.empty());
    CHECK(cell.auroc.has_value());
  }
  CHECK(row_names == std::vector<std::string>{"CLN", "RAW", "TSF", "CLN+RAW", "CLN+TSF",
                                              "TSF+RAW", "CLN+TSF+RAW"});
  int best_rows = 0;
  for (const AblationCell& cell : result.feature_set_rows) best_rows += cell.best_in_row;
  CHECK(best_rows == 1);

  int best_cells = 0;
  for (const AblationCell& cell : result.group_mode_cells) {
    CHECK((cell.mode == "combination" || cell.mode == "post" || cell.mode == "pre"));
    best_cells += cell.best_in_row;
  }
  CHECK(best_cells == 7);  // one per row

  AblationGrids none;
  none.feature_sets = false;
  none.group_modes = false;
  CHECK_THROWS_AS(ablation_grid(cohort, none, {}, {}), Error);
}

TEST_CASE("subgroup analysis partitions the cohort") {
  EvaluationReport report;
  std::vector<PatientRecord> records;
  for (int i = 0; i < 8; ++i) {
    std::string id = "p" + std::to_string(i);
    int label = i < 3 ? 1 : 0;
    report.folds.push_back(fold(id, label, label == 1 ? 0.8 : 0.2));
    PatientRecord r = rec(id, label, 60.0 + 4.0 * i, i % 2 ? Sex::Male : Sex::Female,
                          i % 2 ? Mtici::Three : Mtici::TwoC);
    r.nihss = 10 + i;
    r.passes = 1 + i % 3;
    r.race = i % 2 ? "White" : "black";
    records.push_back(r);
  }
  report.metrics = metrics_from_folds(report.folds, 0.5);

  SubgroupTable table = subgroup_analysis(report, records);
  CHECK(table.rows.size() == 12);  // 6 dimensions x 2 partitions
  CHECK(table.pairs.size() == 6);
  CHECK(table.skipped.empty());
  CHECK(table.age_median == doctest::Approx(74.0));
  CHECK(table.nihss_median == doctest::Approx(13.5));
  size_t total = 0;
  for (const SubgroupRow& row : table.rows) total += row.n;
  CHECK(total == 48);  // every patient lands in one partition per dimension

  // identical score distributions: two-sided MWU p = 1 in both strata
  for (const SubgroupPair& pair : table.pairs) {
    if (pair.p_label0) CHECK(*pair.p_label0 >= 0.3);
    if (pair.p_label1) CHECK(*pair.p_label1 >= 0.3);
  }

  // covariates missing everywhere -> dimension is skipped, not fabricated
  for (PatientRecord& r : records) {
    r.nihss.reset();
    r.passes.reset();
    r.race.reset();
  }
  SubgroupTable sparse = subgroup_analysis(report, records);
  CHECK(sparse.rows.size() == 6);
  CHECK(sparse.skipped == std::vector<std::string>{"race", "nihss", "passes"});

  report.folds.push_back(fold("unknown", 0, 0.5));
  CHECK_THROWS_AS(subgroup_analysis(report, records), Error);
}

TEST_CASE("univariate screen ranks features with registered directions") {
  DirectionRegistry reg = DirectionRegistry::defaults();
  CHECK(reg.lookup("lateral.post.flow.decayTime") == stats::Alternative::Less);
  CHECK(reg.lookup("ap.combination.peak.peakHeight") == stats::Alternative::Greater);
  CHECK(reg.lookup("ap.combination.flow.signalCorrelation") == stats::Alternative::Less);
  CHECK(reg.lookup("ap.post.raw.f07") == stats::Alternative::TwoSided);

  std::vector<FeatureVector> rows;
  std::vector<int> labels;
  for (int i = 0; i < 12; ++i) {
    int label = i < 6 ? 1 : 0;
    FeatureVector fv;
    fv.patient_id = "p" + std::to_string(i);
    fv.names = {"ap.post.peak.peakHeight", "ap.post.flow.decayTime", "noise"};
    double up = label == 1 ? 1.0 : 0.0;
    fv.values = {up + 0.01 * i, 10.0 - 5.0 * up + 0.01 * i, 0.5};
    rows.push_back(fv);
    labels.push_back(label);
  }
  std::vector<UnivariateRow> screen = univariate_screen(rows, labels);
  REQUIRE(screen.size() == 3);
  CHECK(screen[0].p_value < 0.01);  // higher in positives, direction Greater
  CHECK(screen[1].p_value < 0.01);  // lower in positives, direction Less
  CHECK(screen[0].median_positive > screen[0].median_negative);
  CHECK(screen[1].median_positive < screen[1].median_negative);
  CHECK(screen[2].p_value == doctest::Approx(1.0));  // constant feature

  CHECK_THROWS_AS(univariate_screen(rows, std::vector<int>(12, 1)), Error);
}

TEST_CASE("cohort summary compares demographics across labels") {
  std::vector<PatientRecord> records;
  for (int i = 0; i < 12; ++i) {
    int label = i < 4 ? 1 : 0;
    PatientRecord r = rec("p" + std::to_string(i), label, 60.0 + i,
                          i % 2 ? Sex::Male : Sex::Female, i % 3 ? Mtici::Three : Mtici::TwoC);
    r.nihss = 8 + i;
    r.passes = 1 + i % 2;
    r.race = i % 4 ? "white" : "other";
    records.push_back(r);
  }
  std::vector<SummaryRow> rows = summarize_cohort(records);
  REQUIRE(rows.size() == 6);
  CHECK(rows[0].variable == "age");
  CHECK(rows[0].kind == "continuous");
  // no-reflow ages are 60..63, reflow 64..71
  CHECK(rows[0].median_noreflow == doctest::Approx(61.5));
  CHECK(rows[0].median_reflow == doctest::Approx(67.5));
  CHECK(rows[0].iqr_lo_reflow == doctest::Approx(65.75));
  CHECK(rows[0].iqr_hi_reflow == doctest::Approx(69.25));
  CHECK(rows[0].test == "mann_whitney");
  REQUIRE(rows[0].p_value.has_value());
  CHECK(*rows[0].p_value < 0.05);

  bool saw_sex = false;
  for (const SummaryRow& row : rows)
    if (row.variable == "sex=male") {
      saw_sex = true;
      CHECK(row.kind == "categorical");
      CHECK(row.test == "fisher_exact");
      CHECK(row.count_reflow + row.count_noreflow == 6);
    }
  CHECK(saw_sex);
}
