#pragma once

// End-to-end runs: per member align -> L2-normalize -> labeled training ->
// self-training -> target probabilities, then combine members.
//
// Configuration is a list of `key = value` settings. Per-round schedule keys
// accept either one value (used for every round) or exactly `rounds` values.
//
//   aligner            none | coral | padd                      (coral)
//   coral_lambda       ridge added to both covariances          (0.001)
//   padd_rounds, padd_gd_iters, padd_learning_rate,
//   padd_momentum, padd_l1                                      (30, 200, 4, 0.9, 0.0002)
//   alpha0, beta0      labeled-stage loss weights               (0.4, 0.2)
//   eta0               labeled-stage learning rate              (40)
//   labeled_iters      labeled-stage GD iterations              (400)
//   momentum           Nesterov momentum for both stages        (0.9)
//   rounds             self-training rounds T                   (30)
//   alpha, beta, gamma per-round loss weights                   (0.1, 0.05, 0.9)
//   tau_s, tau_tu      per-round source / target thresholds     (0.8; 0.9/0.8/0.7 by thirds)
//   eta                per-round learning rate                  (80)
//   selftrain_iters    GD iterations per round                  (200)
//   threshold_mode     probability | logit                      (probability)
//   source_confidence  predicted | true                         (predicted)
//   combiner           average | majority | weighted_confidence |
//                      weighted_confidence_validation           (average)
//   pca_k              fuse members by PCA to k dims, one run   (unset)
//   bagging            bootstrap member count from one bundle   (unset)
//   seed               bagging seed                             (0)
//   member             bundle directory, repeatable
//   members            comma-separated bundle directories
//   parallelism        concurrent members, 0 = hardware threads (1)

#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pace/classifier.hpp"
#include "pace/coral.hpp"
#include "pace/ensemble.hpp"
#include "pace/error.hpp"
#include "pace/feature_io.hpp"
#include "pace/linalg.hpp"
#include "pace/padd.hpp"
#include "pace/self_training.hpp"

namespace pace {

enum class Aligner { none, coral, padd };
enum class Combiner { average, majority, weighted_confidence, weighted_confidence_validation };

inline constexpr int kReportFormatVersion = 1;

struct PipelineConfig {
  Aligner aligner = Aligner::coral;
  CoralConfig coral;
  PaddConfig padd;
  double alpha0 = 0.4;
  double beta0 = 0.2;
  double eta0 = 40.0;
  std::size_t labeled_iters = 400;
  SelfTrainSchedule schedule = SelfTrainSchedule::defaults(30);
  Combiner combiner = Combiner::average;
  std::optional<Index> pca_k;
  std::optional<std::size_t> bagging;
  std::uint64_t seed = 0;
  std::vector<std::string> members;
  std::size_t parallelism = 1;

  GdConfig labeled_gd() const { return {eta0, labeled_iters, schedule.momentum, true}; }
};

// ---------------------------------------------------------------------------
// Names

inline std::string to_string(Aligner a) {
  switch (a) {
    case Aligner::none: return "none";
    case Aligner::coral: return "coral";
    case Aligner::padd: return "padd";
  }
  return "?";
}

inline std::string to_string(Combiner c) {
  switch (c) {
    case Combiner::average: return "average";
    case Combiner::majority: return "majority";
    case Combiner::weighted_confidence: return "weighted_confidence";
    case Combiner::weighted_confidence_validation: return "weighted_confidence_validation";
  }
  return "?";
}

inline std::string to_string(ThresholdMode m) { return m == ThresholdMode::probability ? "probability" : "logit"; }

inline std::string to_string(SourceConfidence s) {
  return s == SourceConfidence::predicted_class ? "predicted" : "true";
}

inline std::string to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::config: return "config";
    case ErrorKind::data: return "data";
    case ErrorKind::numeric: return "numeric";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Config parsing

using Setting = std::pair<std::string, std::string>;

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

inline std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size() || !std::isfinite(v)) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: '" + key + "' expects a number, got '" + value + "'");
  }
}

inline std::uint64_t parse_unsigned(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw ConfigError("config: '" + key + "' expects a non-negative integer, got '" + value + "'");
  }
  return v;
}

inline std::vector<double> parse_doubles(const std::string& key, const std::string& value) {
  std::vector<double> out;
  for (const auto& item : split_list(value)) out.push_back(parse_double(key, item));
  if (out.empty()) throw ConfigError("config: '" + key + "' is empty");
  return out;
}

inline std::vector<double> expand_rounds(const std::string& key, const std::vector<double>& values,
                                         std::size_t rounds) {
  if (values.size() == 1) return std::vector<double>(rounds, values.front());
  if (values.size() == rounds) return values;
  throw ConfigError("config: '" + key + "' has " + std::to_string(values.size()) +
                    " values; expected 1 or rounds=" + std::to_string(rounds));
}

}  // namespace detail

/// Parses `key = value` lines. Blank lines and lines starting with '#' are
/// ignored; text after '#' is a comment.
inline std::vector<Setting> parse_settings(std::string_view text) {
  std::vector<Setting> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    if (detail::trim(line).empty()) {
      if (end == text.size()) break;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    out.emplace_back(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    if (end == text.size()) break;
  }
  return out;
}

/// Builds a config from settings applied in order (later settings win).
inline PipelineConfig build_config(const std::vector<Setting>& settings) {
  PipelineConfig cfg;
  std::map<std::string, std::vector<double>> per_round;
  std::optional<std::vector<std::string>> member_list;
  std::vector<std::string> extra_members;

  for (const auto& [key, value] : settings) {
    using namespace detail;
    if (key == "aligner") {
      if (value == "none") cfg.aligner = Aligner::none;
      else if (value == "coral") cfg.aligner = Aligner::coral;
      else if (value == "padd") cfg.aligner = Aligner::padd;
      else throw ConfigError("config: unknown aligner '" + value + "'");
    } else if (key == "coral_lambda") {
      cfg.coral.lambda = parse_double(key, value);
    } else if (key == "padd_rounds") {
      cfg.padd.rounds = parse_unsigned(key, value);
    } else if (key == "padd_gd_iters") {
      cfg.padd.gd_iters = parse_unsigned(key, value);
    } else if (key == "padd_learning_rate") {
      cfg.padd.learning_rate = parse_double(key, value);
    } else if (key == "padd_momentum") {
      cfg.padd.momentum = parse_double(key, value);
    } else if (key == "padd_l1") {
      cfg.padd.l1_lambda = parse_double(key, value);
    } else if (key == "alpha0") {
      cfg.alpha0 = parse_double(key, value);
    } else if (key == "beta0") {
      cfg.beta0 = parse_double(key, value);
    } else if (key == "eta0") {
      cfg.eta0 = parse_double(key, value);
    } else if (key == "labeled_iters") {
      cfg.labeled_iters = parse_unsigned(key, value);
    } else if (key == "momentum") {
      cfg.schedule.momentum = parse_double(key, value);
    } else if (key == "rounds") {
      per_round["rounds"] = {static_cast<double>(parse_unsigned(key, value))};
    } else if (key == "alpha" || key == "beta" || key == "gamma" || key == "tau_s" || key == "tau_tu" ||
               key == "eta") {
      per_round[key] = parse_doubles(key, value);
    } else if (key == "selftrain_iters") {
      cfg.schedule.gd_iters = parse_unsigned(key, value);
    } else if (key == "threshold_mode") {
      if (value == "probability") cfg.schedule.threshold_mode = ThresholdMode::probability;
      else if (value == "logit") cfg.schedule.threshold_mode = ThresholdMode::logit;
      else throw ConfigError("config: unknown threshold_mode '" + value + "'");
    } else if (key == "source_confidence") {
      if (value == "predicted") cfg.schedule.source_confidence = SourceConfidence::predicted_class;
      else if (value == "true") cfg.schedule.source_confidence = SourceConfidence::true_class;
      else throw ConfigError("config: unknown source_confidence '" + value + "'");
    } else if (key == "combiner") {
      if (value == "average") cfg.combiner = Combiner::average;
      else if (value == "majority") cfg.combiner = Combiner::majority;
      else if (value == "weighted_confidence") cfg.combiner = Combiner::weighted_confidence;
      else if (value == "weighted_confidence_validation") cfg.combiner = Combiner::weighted_confidence_validation;
      else throw ConfigError("config: unknown combiner '" + value + "'");
    } else if (key == "pca_k") {
      if (value.empty() || value == "none") cfg.pca_k.reset();
      else cfg.pca_k = static_cast<Index>(parse_unsigned(key, value));
    } else if (key == "bagging") {
      if (value.empty() || value == "none") cfg.bagging.reset();
      else cfg.bagging = parse_unsigned(key, value);
    } else if (key == "seed") {
      cfg.seed = parse_unsigned(key, value);
    } else if (key == "member") {
      extra_members.push_back(value);
    } else if (key == "members") {
      member_list = split_list(value);
      extra_members.clear();
    } else if (key == "parallelism") {
      cfg.parallelism = parse_unsigned(key, value);
    } else {
      throw ConfigError("config: unknown key '" + key + "'");
    }
  }

  std::size_t rounds = 30;
  if (auto it = per_round.find("rounds"); it != per_round.end()) rounds = static_cast<std::size_t>(it->second.front());
  SelfTrainSchedule schedule = SelfTrainSchedule::defaults(rounds);
  schedule.gd_iters = cfg.schedule.gd_iters;
  schedule.momentum = cfg.schedule.momentum;
  schedule.threshold_mode = cfg.schedule.threshold_mode;
  schedule.source_confidence = cfg.schedule.source_confidence;
  const std::pair<const char*, std::vector<double>*> slots[] = {
      {"alpha", &schedule.alpha}, {"beta", &schedule.beta},         {"gamma", &schedule.gamma},
      {"tau_s", &schedule.tau_source}, {"tau_tu", &schedule.tau_target}, {"eta", &schedule.learning_rate}};
  for (const auto& [key, slot] : slots) {
    if (auto it = per_round.find(key); it != per_round.end()) *slot = detail::expand_rounds(key, it->second, rounds);
  }
  cfg.schedule = std::move(schedule);

  if (member_list) cfg.members = *member_list;
  cfg.members.insert(cfg.members.end(), extra_members.begin(), extra_members.end());
  return cfg;
}

inline void validate(const PipelineConfig& cfg) {
  try {
    validate(cfg.coral);
    validate(cfg.padd);
    validate(cfg.labeled_gd());
    validate(cfg.schedule);
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  if (!(cfg.alpha0 >= 0 && cfg.beta0 >= 0)) throw ConfigError("config: alpha0 and beta0 must be >= 0");
  if (cfg.pca_k && cfg.bagging) throw ConfigError("config: pca_k and bagging are mutually exclusive");
  if (cfg.pca_k && *cfg.pca_k < 1) throw ConfigError("config: pca_k must be >= 1");
  if (cfg.bagging && *cfg.bagging < 1) throw ConfigError("config: bagging needs at least one member");
}

inline nlohmann::json to_json(const PipelineConfig& cfg) {
  nlohmann::json j;
  j["aligner"] = to_string(cfg.aligner);
  j["coral_lambda"] = cfg.coral.lambda;
  j["padd_rounds"] = cfg.padd.rounds;
  j["padd_gd_iters"] = cfg.padd.gd_iters;
  j["padd_learning_rate"] = cfg.padd.learning_rate;
  j["padd_momentum"] = cfg.padd.momentum;
  j["padd_l1"] = cfg.padd.l1_lambda;
  j["alpha0"] = cfg.alpha0;
  j["beta0"] = cfg.beta0;
  j["eta0"] = cfg.eta0;
  j["labeled_iters"] = cfg.labeled_iters;
  j["momentum"] = cfg.schedule.momentum;
  j["nesterov"] = true;
  j["rounds"] = cfg.schedule.rounds();
  j["alpha"] = cfg.schedule.alpha;
  j["beta"] = cfg.schedule.beta;
  j["gamma"] = cfg.schedule.gamma;
  j["tau_s"] = cfg.schedule.tau_source;
  j["tau_tu"] = cfg.schedule.tau_target;
  j["eta"] = cfg.schedule.learning_rate;
  j["selftrain_iters"] = cfg.schedule.gd_iters;
  j["threshold_mode"] = to_string(cfg.schedule.threshold_mode);
  j["source_confidence"] = to_string(cfg.schedule.source_confidence);
  j["combiner"] = to_string(cfg.combiner);
  j["pca_k"] = cfg.pca_k ? nlohmann::json(*cfg.pca_k) : nlohmann::json(nullptr);
  j["bagging"] = cfg.bagging ? nlohmann::json(*cfg.bagging) : nlohmann::json(nullptr);
  j["seed"] = cfg.seed;
  j["members"] = cfg.members;
  j["parallelism"] = cfg.parallelism;
  return j;
}

// ---------------------------------------------------------------------------
// Members

/// Error raised inside one member run, tagged with the failing stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.kind(), "stage '" + stage + "': " + cause.what()), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct StageTimings {
  double load_ms = 0;
  double align_ms = 0;
  double normalize_ms = 0;
  double train_ms = 0;
  double selftrain_ms = 0;
  double predict_ms = 0;
};

struct MemberFailure {
  std::string stage;
  ErrorKind kind = ErrorKind::data;
  std::string message;
};

struct MemberResult {
  std::string id;
  std::optional<MemberFailure> failure;
  LinearClassifier classifier;
  PredictionSet predictions;
  GdTrace labeled_trace;
  std::vector<RoundTrace> rounds;
  std::optional<double> labeled_target_accuracy;  // after labeled training only
  std::optional<double> target_accuracy;
  std::optional<double> validation_accuracy;
  StageTimings timings;

  bool ok() const noexcept { return !failure.has_value(); }
};

namespace detail {

class Stopwatch {
 public:
  double lap_ms() {
    const auto now = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(now - start_).count();
    start_ = now;
    return ms;
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

template <typename F>
auto run_stage(const char* stage, F&& f) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e);
  }
}

inline DataBundle normalize_bundle(DataBundle b) {
  b.source.features = l2_normalize(b.source.features);
  if (!b.target_labeled.empty()) b.target_labeled.features = l2_normalize(b.target_labeled.features);
  b.target_unlabeled = l2_normalize(b.target_unlabeled);
  if (!b.validation.empty()) b.validation.features = l2_normalize(b.validation.features);
  return b;
}

}  // namespace detail

inline DataBundle align_bundle(const DataBundle& bundle, const PipelineConfig& cfg) {
  switch (cfg.aligner) {
    case Aligner::coral: return coral_align(bundle, cfg.coral);
    case Aligner::padd: return padd_align(bundle, cfg.padd);
    case Aligner::none: break;
  }
  return bundle;
}

/// Aligns, normalizes, trains and self-trains one member, then predicts
/// target probabilities. Errors surface as StageError.
inline MemberResult run_member(const DataBundle& bundle, const PipelineConfig& cfg, std::string id = "member-0") {
  MemberResult r;
  r.id = std::move(id);
  detail::Stopwatch clock;
  detail::run_stage("validate", [&] { validate_bundle(bundle); return 0; });
  DataBundle aligned = detail::run_stage("align", [&] { return align_bundle(bundle, cfg); });
  r.timings.align_ms = clock.lap_ms();
  const DataBundle prepared = detail::run_stage("normalize", [&] { return detail::normalize_bundle(std::move(aligned)); });
  r.timings.normalize_ms = clock.lap_ms();

  LinearClassifier labeled = detail::run_stage("train", [&] {
    return train_labeled(prepared, cfg.alpha0, cfg.beta0, cfg.labeled_gd());
  });
  r.labeled_trace = labeled.trace;
  if (prepared.target_eval_labels) {
    r.labeled_target_accuracy = accuracy(labeled.weights, prepared.target_unlabeled, *prepared.target_eval_labels);
  }
  r.timings.train_ms = clock.lap_ms();

  SelfTrainResult st = detail::run_stage("selftrain", [&] { return self_train(labeled.weights, prepared, cfg.schedule); });
  r.classifier = std::move(st.classifier);
  r.rounds = std::move(st.trace);
  r.timings.selftrain_ms = clock.lap_ms();

  detail::run_stage("predict", [&] {
    r.predictions.member_id = r.id;
    r.predictions.probs = softmax_probs(logits(r.classifier.weights, prepared.target_unlabeled));
    if (prepared.target_eval_labels) {
      r.target_accuracy = accuracy(r.classifier.weights, prepared.target_unlabeled, *prepared.target_eval_labels);
    }
    if (!prepared.validation.empty()) {
      r.validation_accuracy = accuracy(r.classifier.weights, prepared.validation.features, prepared.validation.labels);
      r.predictions.validation_accuracy = r.validation_accuracy;
    }
    return 0;
  });
  r.timings.predict_ms = clock.lap_ms();
  return r;
}

// ---------------------------------------------------------------------------
// Whole runs

struct MemberInput {
  std::string id;
  std::optional<DataBundle> bundle;
  std::optional<MemberFailure> load_failure;
};

struct RunReport {
  PipelineConfig config;
  std::vector<MemberResult> members;
  /// Accuracy on the unlabeled target set per combiner name; absent when the
  /// bundles carry no evaluation labels.
  std::map<std::string, std::optional<double>> ensemble_accuracy;
  std::optional<LabelVector> predictions;  // from the configured combiner
  double total_ms = 0;
};

namespace detail {

inline FeatureMatrix hstack(std::span<const FeatureMatrix* const> parts) {
  Index cols = 0;
  for (const auto* p : parts) cols += p->cols();
  FeatureMatrix out(parts.front()->rows(), cols);
  Index offset = 0;
  for (const auto* p : parts) {
    if (p->rows() != out.rows()) throw DimensionError("pca fusion: members disagree on sample counts");
    out.middleCols(offset, p->cols()) = *p;
    offset += p->cols();
  }
  return out;
}

/// Concatenates member features column-wise, fits PCA on source + labeled
/// target + unlabeled target, and projects every set to k dimensions.
inline DataBundle pca_fuse(const std::vector<DataBundle>& members, Index k) {
  const DataBundle& first = members.front();
  for (const auto& m : members) {
    if (m.source.labels.labels != first.source.labels.labels ||
        m.target_labeled.labels.labels != first.target_labeled.labels.labels ||
        m.validation.labels.labels != first.validation.labels.labels ||
        m.target_unlabeled.rows() != first.target_unlabeled.rows()) {
      throw DimensionError("pca fusion: members must share samples and labels");
    }
  }
  auto gather = [&](auto select) {
    std::vector<const FeatureMatrix*> parts;
    for (const auto& m : members) parts.push_back(&select(m));
    return hstack(parts);
  };
  DataBundle fused = first;
  fused.source.features = gather([](const DataBundle& b) -> const FeatureMatrix& { return b.source.features; });
  fused.target_labeled.features =
      gather([](const DataBundle& b) -> const FeatureMatrix& { return b.target_labeled.features; });
  fused.target_unlabeled = gather([](const DataBundle& b) -> const FeatureMatrix& { return b.target_unlabeled; });
  fused.validation.features = gather([](const DataBundle& b) -> const FeatureMatrix& { return b.validation.features; });

  const FeatureMatrix all = vstack(vstack(fused.source.features, fused.target_labeled.features), fused.target_unlabeled);
  const PcaModel model = pca_fit(all, k);
  fused.source.features = pca_transform(model, fused.source.features);
  fused.target_labeled.features = pca_transform(model, fused.target_labeled.features);
  fused.target_unlabeled = pca_transform(model, fused.target_unlabeled);
  fused.validation.features = pca_transform(model, fused.validation.features);
  return fused;
}

/// Bootstrap copy: source and labeled-target rows resampled with replacement.
/// Unlabeled target and validation rows are kept so every member predicts the
/// same samples.
inline DataBundle bootstrap_bundle(const DataBundle& b, std::uint64_t seed) {
  DataBundle out = b;
  const auto src = bootstrap_indices(static_cast<std::size_t>(b.source.size()), seed);
  out.source = {select_rows(b.source.features, src), select_labels(b.source.labels, src)};
  if (!b.target_labeled.empty()) {
    const auto tl = bootstrap_indices(static_cast<std::size_t>(b.target_labeled.size()), seed ^ 0x9E3779B97F4A7C15ULL);
    out.target_labeled = {select_rows(b.target_labeled.features, tl), select_labels(b.target_labeled.labels, tl)};
  }
  return out;
}

inline std::vector<MemberResult> run_members(const std::vector<MemberInput>& inputs, const PipelineConfig& cfg) {
  std::vector<MemberResult> results(inputs.size());
  auto work = [&](std::size_t i) {
    const auto& in = inputs[i];
    MemberResult& r = results[i];
    if (!in.bundle) {
      r.id = in.id;
      r.failure = in.load_failure;
      return;
    }
    try {
      r = run_member(*in.bundle, cfg, in.id);
    } catch (const StageError& e) {
      r = MemberResult{};
      r.id = in.id;
      r.failure = MemberFailure{e.stage(), e.kind(), e.what()};
    }
  };
  std::size_t threads = cfg.parallelism == 0 ? std::max(1u, std::thread::hardware_concurrency()) : cfg.parallelism;
  threads = std::min(threads, inputs.size());
  if (threads <= 1) {
    for (std::size_t i = 0; i < inputs.size(); ++i) work(i);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < inputs.size(); i = next++) work(i);
    });
  }
  pool.clear();
  return results;
}

inline double label_accuracy(const LabelVector& pred, const LabelVector& truth) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += pred[i] == truth[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

}  // namespace detail

/// Runs every member and combines the successful ones. `ids` names the
/// bundles in the report (defaults to member-<i>).
inline RunReport run_pipeline(const PipelineConfig& cfg, const std::vector<DataBundle>& bundles,
                              std::vector<std::string> ids = {}) {
  validate(cfg);
  detail::Stopwatch clock;
  if (bundles.empty()) throw ConfigError("run: no member inputs");
  if (ids.empty()) {
    for (std::size_t i = 0; i < bundles.size(); ++i) ids.push_back("member-" + std::to_string(i));
  }
  if (ids.size() != bundles.size()) throw ConfigError("run: member id count differs from bundle count");

  std::vector<MemberInput> inputs;
  if (cfg.pca_k) {
    inputs.push_back({"pca-" + std::to_string(*cfg.pca_k), detail::pca_fuse(bundles, *cfg.pca_k), std::nullopt});
  } else if (cfg.bagging) {
    if (bundles.size() != 1) throw ConfigError("run: bagging resamples exactly one member input");
    for (std::size_t i = 0; i < *cfg.bagging; ++i) {
      inputs.push_back({"bag-" + std::to_string(i), detail::bootstrap_bundle(bundles.front(), cfg.seed + i), std::nullopt});
    }
  } else {
    for (std::size_t i = 0; i < bundles.size(); ++i) inputs.push_back({ids[i], bundles[i], std::nullopt});
  }
  return [&] {
    RunReport report;
    report.config = cfg;
    report.members = detail::run_members(inputs, cfg);

    std::vector<PredictionSet> sets;
    const MemberInput* reference = nullptr;
    for (std::size_t i = 0; i < report.members.size(); ++i) {
      if (!report.members[i].ok()) continue;
      sets.push_back(report.members[i].predictions);
      if (!reference) reference = &inputs[i];
    }
    if (!sets.empty()) {
      bool have_validation = true;
      for (const auto& s : sets) have_validation = have_validation && s.validation_accuracy.has_value();
      std::map<std::string, LabelVector> combined;
      combined["average"] = average_predict(sets);
      combined["majority"] = majority_vote(sets);
      combined["weighted_confidence"] = weighted_vote(sets, VoteWeighting::confidence);
      if (have_validation) {
        combined["weighted_confidence_validation"] = weighted_vote(sets, VoteWeighting::confidence_and_validation);
      }
      const auto& eval = reference->bundle->target_eval_labels;
      for (const auto& [name, labels] : combined) {
        report.ensemble_accuracy[name] =
            eval ? std::optional<double>(detail::label_accuracy(labels, *eval)) : std::nullopt;
      }
      if (auto it = combined.find(to_string(cfg.combiner)); it != combined.end()) {
        report.predictions = it->second;
      } else {
        throw ConfigError("run: combiner '" + to_string(cfg.combiner) + "' needs validation sets on every member");
      }
    }
    report.total_ms = clock.lap_ms();
    return report;
  }();
}

/// Loads member bundles from cfg.members. A member that fails to load is
/// reported as failed at stage "load"; the others still run.
inline RunReport run_pipeline(const PipelineConfig& cfg) {
  validate(cfg);
  if (cfg.members.empty()) throw ConfigError("run: no member inputs");
  std::vector<DataBundle> bundles;
  std::vector<std::string> ids;
  std::vector<std::optional<MemberFailure>> load_failures;
  for (const auto& path : cfg.members) {
    try {
      bundles.push_back(load_bundle(path));
      ids.push_back(path);
      load_failures.emplace_back();
    } catch (const Error& e) {
      if (cfg.pca_k || cfg.bagging) throw StageError("load", e);
      load_failures.push_back(MemberFailure{"load", e.kind(), std::string("stage 'load': ") + e.what()});
    }
  }
  if (bundles.empty()) throw StageError("load", Error(load_failures.front()->kind, load_failures.front()->message));
  RunReport report = run_pipeline(cfg, bundles, ids);
  if (cfg.pca_k || cfg.bagging) return report;

  std::vector<MemberResult> ordered;
  auto loaded = report.members.begin();
  for (std::size_t i = 0; i < cfg.members.size(); ++i) {
    if (load_failures[i]) {
      MemberResult r;
      r.id = cfg.members[i];
      r.failure = load_failures[i];
      ordered.push_back(std::move(r));
    } else {
      ordered.push_back(std::move(*loaded++));
    }
  }
  report.members = std::move(ordered);
  return report;
}

// ---------------------------------------------------------------------------
// Report serialization

inline nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline nlohmann::json to_json(const MemberResult& m) {
  nlohmann::json j;
  j["id"] = m.id;
  if (!m.ok()) {
    j["status"] = "failed";
    j["error"] = {{"stage", m.failure->stage}, {"kind", to_string(m.failure->kind)}, {"message", m.failure->message}};
    return j;
  }
  j["status"] = "ok";
  j["target_accuracy"] = optional_json(m.target_accuracy);
  j["validation_accuracy"] = optional_json(m.validation_accuracy);
  j["labeled_stage"] = {
      {"target_accuracy", optional_json(m.labeled_target_accuracy)},
      {"loss_start", m.labeled_trace.losses.empty() ? 0.0 : m.labeled_trace.losses.front()},
      {"loss_end", m.labeled_trace.final_loss},
  };
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& r : m.rounds) {
    rounds.push_back({{"round", r.round},
                      {"source_kept", r.source_kept},
                      {"target_kept", r.target_kept},
                      {"loss_start", r.loss_start},
                      {"loss_end", r.loss_end},
                      {"target_accuracy", optional_json(r.target_accuracy)}});
  }
  j["rounds"] = std::move(rounds);
  return j;
}

/// Report document. Everything outside "timing" is deterministic for a
/// single-threaded run.
inline nlohmann::json to_json(const RunReport& report, bool include_timing = true) {
  nlohmann::json j;
  j["format_version"] = kReportFormatVersion;
  j["config"] = to_json(report.config);
  nlohmann::json members = nlohmann::json::array();
  for (const auto& m : report.members) members.push_back(to_json(m));
  j["members"] = std::move(members);
  nlohmann::json acc = nlohmann::json::object();
  for (const auto& [name, value] : report.ensemble_accuracy) acc[name] = optional_json(value);
  std::size_t ok = 0;
  for (const auto& m : report.members) ok += m.ok() ? 1 : 0;
  j["ensemble"] = {{"combiner", to_string(report.config.combiner)}, {"num_members", ok}, {"accuracy", acc}};
  if (include_timing) {
    nlohmann::json t = nlohmann::json::array();
    for (const auto& m : report.members) {
      t.push_back({{"id", m.id},
                   {"align_ms", m.timings.align_ms},
                   {"normalize_ms", m.timings.normalize_ms},
                   {"train_ms", m.timings.train_ms},
                   {"selftrain_ms", m.timings.selftrain_ms},
                   {"predict_ms", m.timings.predict_ms}});
    }
    j["timing"] = {{"total_ms", report.total_ms}, {"members", t}};
  }
  return j;
}

/// One JSON object per (member, round), newline-terminated.
inline std::string trace_jsonl(const RunReport& report) {
  std::string out;
  for (const auto& m : report.members) {
    for (const auto& r : m.rounds) {
      nlohmann::json j = {{"member", m.id},
                          {"round", r.round},
                          {"source_kept", r.source_kept},
                          {"target_kept", r.target_kept},
                          {"loss_start", r.loss_start},
                          {"loss_end", r.loss_end},
                          {"target_accuracy", optional_json(r.target_accuracy)},
                          {"pseudo_labels", r.pseudo_labels.labels},
                          {"target_mask", r.target_mask}};
      out += j.dump() + "\n";
    }
  }
  return out;
}

}  // namespace pace
