#include "nrp/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace nrp {

std::string feature_group_name(FeatureGroup g) {
  switch (g) {
    case FeatureGroup::Peak: return "peak";
    case FeatureGroup::Sips: return "sips";
    case FeatureGroup::Flow: return "flow";
    case FeatureGroup::Raw: return "raw";
    case FeatureGroup::Cln: return "cln";
  }
  return "?";
}

std::string feature_mode_name(FeatureMode m) {
  switch (m) {
    case FeatureMode::Combination: return "combination";
    case FeatureMode::PostOnly: return "post";
    case FeatureMode::PreOnly: return "pre";
  }
  return "?";
}

FeatureGroup parse_feature_group(const std::string& text) {
  std::string t;
  for (char c : text) t.push_back(static_cast<char>(std::tolower(c)));
  if (t == "peak") return FeatureGroup::Peak;
  if (t == "sips") return FeatureGroup::Sips;
  if (t == "flow") return FeatureGroup::Flow;
  if (t == "raw") return FeatureGroup::Raw;
  if (t == "cln") return FeatureGroup::Cln;
  throw Error(ErrorCode::ParseError, "bad feature group '" + text + "'");
}

FeatureMode parse_feature_mode(const std::string& text) {
  if (text == "combination" || text == "comb") return FeatureMode::Combination;
  if (text == "post" || text == "post_only") return FeatureMode::PostOnly;
  if (text == "pre" || text == "pre_only") return FeatureMode::PreOnly;
  throw Error(ErrorCode::ParseError, "bad feature mode '" + text + "'");
}

std::string FeatureConfig::describe() const {
  std::ostringstream out;
  out << "mode=" << feature_mode_name(mode) << " groups=";
  bool first = true;
  for (FeatureGroup g : groups) {
    if (!first) out << "+";
    out << feature_group_name(g);
    first = false;
  }
  out << " views=";
  first = true;
  for (View v : views) {
    if (!first) out << "+";
    out << view_name(v);
    first = false;
  }
  out << " L=" << raw_length << " beta=" << beta;
  if (decay_literal_mode) out << " decay_literal";
  if (raw_fill_continuity) out << " raw_fill_continuity";
  return out.str();
}

namespace {

const std::vector<double>& vals(const PerfusionSignal& s) { return s.values; }

double sig_max(const PerfusionSignal& s) {
  return *std::max_element(s.values.begin(), s.values.end());
}

double sig_min(const PerfusionSignal& s) {
  return *std::min_element(s.values.begin(), s.values.end());
}

double mean_of(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

// Population (biased) standard deviation.
double pop_sd(const std::vector<double>& v) {
  double mu = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - mu) * (x - mu);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

double standardized_moment(const std::vector<double>& v, int order) {
  double mu = mean_of(v);
  double sd = pop_sd(v);
  if (sd <= 0.0) throw Error(ErrorCode::ZeroVariance, "constant signal");
  double acc = 0.0;
  for (double x : v) acc += std::pow((x - mu) / sd, order);
  return acc / static_cast<double>(v.size());
}

// 1-based index of the earliest sample reaching alpha * max.
size_t t_alpha(const PerfusionSignal& s, double alpha) {
  double level = alpha * sig_max(s);
  for (size_t i = 0; i < s.len(); ++i)
    if (s.values[i] >= level) return i + 1;
  return s.len();  // unreachable for alpha <= 1
}

// Half-max width, strict inequality: max{t: x > 0.5 max} - min{t: x > 0.5 max}.
double half_max_width(const PerfusionSignal& s) {
  double level = 0.5 * sig_max(s);
  size_t first = 0, last = 0;
  for (size_t i = 0; i < s.len(); ++i) {
    if (s.values[i] > level) {
      if (first == 0) first = i + 1;
      last = i + 1;
    }
  }
  return first == 0 ? 0.0 : static_cast<double>(last - first);
}

double max_first_difference(const PerfusionSignal& s) {
  double best = -std::numeric_limits<double>::infinity();
  for (size_t i = 1; i < s.len(); ++i)
    best = std::max(best, s.values[i] - s.values[i - 1]);
  return best;
}

// First frame after the peak at or below fraction * max; sentinel = len.
size_t decay_time(const PerfusionSignal& s, const FeatureConfig& cfg) {
  size_t peak = t_alpha(s, 1.0);
  double max_val = sig_max(s);
  if (cfg.decay_literal_mode) {
    for (size_t t = peak + 1; t <= s.len(); ++t)
      if (s.values[t - 1] >= 0.9 * max_val) return t;
  } else {
    for (size_t t = peak + 1; t <= s.len(); ++t)
      if (s.values[t - 1] <= cfg.decay_fraction * max_val) return t;
  }
  return s.len();
}

size_t plateau_count(const PerfusionSignal& s, const FeatureConfig& cfg) {
  size_t n = 0;
  for (size_t i = 1; i < s.len(); ++i)
    if (std::abs(s.values[i] - s.values[i - 1]) < cfg.plateau_epsilon) ++n;
  return n;
}

double pearson_common_prefix(const PerfusionSignal& a, const PerfusionSignal& b) {
  size_t n = std::min(a.len(), b.len());
  std::vector<double> x(a.values.begin(), a.values.begin() + static_cast<long>(n));
  std::vector<double> y(b.values.begin(), b.values.begin() + static_cast<long>(n));
  double sx = pop_sd(x), sy = pop_sd(y);
  if (sx <= 0.0 || sy <= 0.0)
    throw Error(ErrorCode::ZeroVariance, "constant signal in correlation");
  double mx = mean_of(x), my = mean_of(y);
  double cov = 0.0;
  for (size_t i = 0; i < n; ++i) cov += (x[i] - mx) * (y[i] - my);
  cov /= static_cast<double>(n);
  return cov / (sx * sy);
}

void require_aligned_pair(const PerfusionSignal& pre, const PerfusionSignal& post) {
  if (pre.len() < 2 || post.len() < 2)
    throw Error(ErrorCode::DegenerateLength, "aligned signals need >= 2 samples");
}

}  // namespace

std::vector<NamedValue> peak_features(const PerfusionSignal& pre, const PerfusionSignal& post,
                                      const FeatureConfig& /*cfg*/) {
  require_aligned_pair(pre, post);
  double max_pre = sig_max(pre), max_post = sig_max(post);
  if (max_pre == 0.0) throw Error(ErrorCode::ZeroPeak, "max(pre) = 0 for peakRatio");
  return {
      {"peak.peakHeight", max_post - max_pre},
      {"peak.peakWidth", half_max_width(post) - half_max_width(pre)},
      {"peak.peakRatio", max_post / max_pre},
      {"peak.peakSlope", max_first_difference(post) - max_first_difference(pre)},
  };
}

std::vector<NamedValue> sips_features(const PerfusionSignal& pre, const PerfusionSignal& post,
                                      const FeatureConfig& /*cfg*/) {
  require_aligned_pair(pre, post);
  double mu_pre = mean_of(vals(pre)), mu_post = mean_of(vals(post));
  if (mu_pre == 0.0) throw Error(ErrorCode::ZeroMean, "mean(pre) = 0 for meanIntensityRatio");
  return {
      {"sips.meanIntensity", mu_post - mu_pre},
      {"sips.stdDevIntensity", pop_sd(vals(post)) - pop_sd(vals(pre))},
      {"sips.minIntensity", sig_min(post) - sig_min(pre)},
      {"sips.meanIntensityRatio", mu_post / mu_pre},
      {"sips.skewness", standardized_moment(vals(post), 3) - standardized_moment(vals(pre), 3)},
      {"sips.kurtosis", standardized_moment(vals(post), 4) - standardized_moment(vals(pre), 4)},
  };
}

std::vector<NamedValue> flow_features(const PerfusionSignal& pre, const PerfusionSignal& post,
                                      const FeatureConfig& cfg) {
  require_aligned_pair(pre, post);
  double dt50 = static_cast<double>(t_alpha(post, 0.5)) - static_cast<double>(t_alpha(pre, 0.5));
  // pre-minus-post ordering for time-to-peak, as defined
  double dtpeak = static_cast<double>(t_alpha(pre, 1.0)) - static_cast<double>(t_alpha(post, 1.0));
  double dtdecay = static_cast<double>(decay_time(post, cfg)) - static_cast<double>(decay_time(pre, cfg));
  double dplateau = static_cast<double>(plateau_count(post, cfg)) - static_cast<double>(plateau_count(pre, cfg));
  return {
      {"flow.timeTo50Max", dt50},
      {"flow.timeToPeak", dtpeak},
      {"flow.decayTime", dtdecay},
      {"flow.plateauDuration", dplateau},
      {"flow.signalCorrelation", pearson_common_prefix(pre, post)},
  };
}

std::vector<NamedValue> peak_features_single(const PerfusionSignal& x, const FeatureConfig& /*cfg*/) {
  if (x.len() < 2) throw Error(ErrorCode::DegenerateLength, "signal needs >= 2 samples");
  return {
      {"peak.peakHeight", sig_max(x)},
      {"peak.peakWidth", half_max_width(x)},
      {"peak.peakSlope", max_first_difference(x)},
  };
}

std::vector<NamedValue> sips_features_single(const PerfusionSignal& x, const FeatureConfig& /*cfg*/) {
  if (x.len() < 2) throw Error(ErrorCode::DegenerateLength, "signal needs >= 2 samples");
  return {
      {"sips.meanIntensity", mean_of(vals(x))},
      {"sips.stdDevIntensity", pop_sd(vals(x))},
      {"sips.minIntensity", sig_min(x)},
      {"sips.skewness", standardized_moment(vals(x), 3)},
      {"sips.kurtosis", standardized_moment(vals(x), 4)},
  };
}

std::vector<NamedValue> flow_features_single(const PerfusionSignal& x, const FeatureConfig& cfg) {
  if (x.len() < 2) throw Error(ErrorCode::DegenerateLength, "signal needs >= 2 samples");
  return {
      {"flow.timeTo50Max", static_cast<double>(t_alpha(x, 0.5))},
      {"flow.timeToPeak", static_cast<double>(t_alpha(x, 1.0))},
      {"flow.decayTime", static_cast<double>(decay_time(x, cfg))},
      {"flow.plateauDuration", static_cast<double>(plateau_count(x, cfg))},
  };
}

std::vector<double> raw_vector(const PerfusionSignal& post, const FeatureConfig& cfg) {
  const int L = cfg.raw_length;
  if (L < 2) throw Error(ErrorCode::DegenerateLength, "raw_length must be >= 2");
  if (post.len() == 0) throw Error(ErrorCode::DegenerateLength, "empty signal");

  std::vector<double> out;
  out.reserve(static_cast<size_t>(L));
  size_t n = std::min<size_t>(post.len(), static_cast<size_t>(L));
  out.assign(post.values.begin(), post.values.begin() + static_cast<long>(n));
  if (n == static_cast<size_t>(L)) return out;

  const double beta = cfg.beta;
  const double f_n = post.values[n - 1];
  const double ln = static_cast<double>(L) - static_cast<double>(n);
  const double tail = std::exp(-beta * ln);
  const double denom = 1.0 - tail;
  for (size_t t = n + 1; t <= static_cast<size_t>(L); ++t) {
    double offset = cfg.raw_fill_continuity ? static_cast<double>(t - n) - 1.0
                                            : static_cast<double>(t - n) + 1.0;
    double fill = f_n * (std::exp(-beta * offset) - tail) / denom;
    out.push_back(std::max(0.0, fill));
  }
  return out;
}

namespace {

std::string raw_name(int index) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "raw.f%02d", index);
  return buf;
}

void require_signal(const std::map<SeqKey, PerfusionSignal>& signals, SeqKey key) {
  if (!signals.count(key))
    throw Error(ErrorCode::MissingSignal, key.str());
}

}  // namespace

FeatureVector extract_all(const std::map<SeqKey, PerfusionSignal>& signals,
                          const FeatureConfig& cfg, const std::string& patient_id) {
  FeatureVector fv;
  fv.patient_id = patient_id;
  if (cfg.groups.empty()) throw Error(ErrorCode::DegenerateConfig, "empty group set");

  const std::string mode_tag = feature_mode_name(cfg.mode);
  auto push = [&](const std::string& view_tag, const std::string& tag,
                  const std::vector<NamedValue>& nv) {
    for (const NamedValue& f : nv) {
      fv.names.push_back(view_tag + "." + tag + "." + f.name);
      fv.values.push_back(f.value);
    }
  };

  for (View view : cfg.views) {
    const std::string vt = view_name(view);
    SeqKey pre_key{Phase::Pre, view};
    SeqKey post_key{Phase::Post, view};
    if (cfg.mode == FeatureMode::Combination) {
      bool need = cfg.groups.count(FeatureGroup::Peak) || cfg.groups.count(FeatureGroup::Sips) ||
                  cfg.groups.count(FeatureGroup::Flow);
      if (need) {
        require_signal(signals, pre_key);
        require_signal(signals, post_key);
        const PerfusionSignal& pre = signals.at(pre_key);
        const PerfusionSignal& post = signals.at(post_key);
        if (cfg.groups.count(FeatureGroup::Peak)) push(vt, mode_tag, peak_features(pre, post, cfg));
        if (cfg.groups.count(FeatureGroup::Sips)) push(vt, mode_tag, sips_features(pre, post, cfg));
        if (cfg.groups.count(FeatureGroup::Flow)) push(vt, mode_tag, flow_features(pre, post, cfg));
      }
    } else {
      SeqKey key = cfg.mode == FeatureMode::PostOnly ? post_key : pre_key;
      bool need = cfg.groups.count(FeatureGroup::Peak) || cfg.groups.count(FeatureGroup::Sips) ||
                  cfg.groups.count(FeatureGroup::Flow);
      if (need) {
        require_signal(signals, key);
        const PerfusionSignal& x = signals.at(key);
        if (cfg.groups.count(FeatureGroup::Peak)) push(vt, mode_tag, peak_features_single(x, cfg));
        if (cfg.groups.count(FeatureGroup::Sips)) push(vt, mode_tag, sips_features_single(x, cfg));
        if (cfg.groups.count(FeatureGroup::Flow)) push(vt, mode_tag, flow_features_single(x, cfg));
      }
    }
  }

  // RAW is defined on post-procedure signals regardless of mode.
  if (cfg.groups.count(FeatureGroup::Raw)) {
    for (View view : cfg.views) {
      SeqKey post_key{Phase::Post, view};
      require_signal(signals, post_key);
      std::vector<double> raw = raw_vector(signals.at(post_key), cfg);
      for (size_t i = 0; i < raw.size(); ++i) {
        fv.names.push_back(view_name(view) + ".post." + raw_name(static_cast<int>(i) + 1));
        fv.values.push_back(raw[i]);
      }
    }
  }
  return fv;
}

std::vector<std::string> feature_names(const FeatureConfig& cfg) {
  // Probe signals with non-degenerate shape; names depend only on the config.
  PerfusionSignal pre, post;
  pre.values = {0.05, 0.3, 0.6, 0.2};
  post.values = {0.05, 0.4, 0.7, 0.3};
  pre.phase = Phase::Pre;
  post.phase = Phase::Post;
  pre.onset_applied = post.onset_applied = true;
  std::map<SeqKey, PerfusionSignal> signals;
  for (View view : {View::Ap, View::Lateral}) {
    pre.view = post.view = view;
    signals[{Phase::Pre, view}] = pre;
    signals[{Phase::Post, view}] = post;
  }
  return extract_all(signals, cfg).names;
}

void write_feature_csv(const std::filesystem::path& path,
                       const std::vector<FeatureVector>& rows) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "patient_id";
  if (!rows.empty())
    for (const std::string& name : rows.front().names) out << "," << name;
  out << "\n";
  char buf[40];
  for (const FeatureVector& row : rows) {
    out << row.patient_id;
    for (double v : row.values) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << "," << buf;
    }
    out << "\n";
  }
}

std::vector<FeatureVector> read_feature_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "empty CSV " + path.string());

  std::vector<std::string> names;
  {
    std::stringstream ss(line);
    std::string cell;
    bool first = true;
    while (std::getline(ss, cell, ',')) {
      if (first) {
        first = false;
        continue;  // patient_id column
      }
      names.push_back(cell);
    }
  }
  std::vector<FeatureVector> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    FeatureVector fv;
    fv.names = names;
    std::stringstream ss(line);
    std::string cell;
    bool first = true;
    while (std::getline(ss, cell, ',')) {
      if (first) {
        fv.patient_id = cell;
        first = false;
      } else {
        fv.values.push_back(std::strtod(cell.c_str(), nullptr));
      }
    }
    if (fv.values.size() != names.size())
      throw Error(ErrorCode::ParseError, "ragged CSV row in " + path.string());
    rows.push_back(std::move(fv));
  }
  return rows;
}

}  // namespace nrp
