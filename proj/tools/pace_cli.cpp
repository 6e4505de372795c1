// Command-line front end: synthetic data, single stages, full runs and reports.
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "pace/pace.hpp"

namespace fs = std::filesystem;

namespace {

struct ConfigOptions {
  std::string config_file;
  std::vector<std::string> overrides;
};

void add_config_options(CLI::App* cmd, ConfigOptions& opts) {
  cmd->add_option("--config", opts.config_file, "key = value configuration file");
  cmd->add_option("--set", opts.overrides, "override a setting, key=value (repeatable)");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw pace::IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw pace::IoError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw pace::IoError("write failed: " + path.string());
}

/// File settings first, then --set overrides, then dedicated flags: later wins.
pace::PipelineConfig load_config(const ConfigOptions& opts, std::vector<pace::Setting> flags = {}) {
  std::vector<pace::Setting> settings;
  if (!opts.config_file.empty()) {
    std::string text;
    try {
      text = read_text(opts.config_file);
    } catch (const pace::IoError& e) {
      throw pace::ConfigError(e.what());
    }
    settings = pace::parse_settings(text);
  }
  for (const auto& kv : opts.overrides) {
    const auto parsed = pace::parse_settings(kv);
    if (parsed.size() != 1) throw pace::ConfigError("--set expects key=value, got '" + kv + "'");
    settings.push_back(parsed.front());
  }
  settings.insert(settings.end(), flags.begin(), flags.end());
  pace::PipelineConfig cfg = pace::build_config(settings);
  pace::validate(cfg);
  return cfg;
}

nlohmann::json evaluation(const pace::Matrix& w, const pace::DataBundle& b) {
  nlohmann::json j;
  j["source_accuracy"] = pace::accuracy(w, b.source.features, b.source.labels);
  j["target_accuracy"] = b.target_eval_labels
                             ? nlohmann::json(pace::accuracy(w, b.target_unlabeled, *b.target_eval_labels))
                             : nlohmann::json(nullptr);
  j["validation_accuracy"] = b.validation.empty()
                                 ? nlohmann::json(nullptr)
                                 : nlohmann::json(pace::accuracy(w, b.validation.features, b.validation.labels));
  return j;
}

void print_report_summary(const nlohmann::json& report) {
  auto fmt = [](const nlohmann::json& v) {
    if (v.is_null()) return std::string("     -");
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << std::setw(6) << 100.0 * v.get<double>();
    return os.str();
  };
  std::cout << "format_version " << report.at("format_version") << ", aligner "
            << report.at("config").at("aligner").get<std::string>() << ", rounds "
            << report.at("config").at("rounds") << "\n\n";
  std::cout << "member                               labeled  final    val\n";
  for (const auto& m : report.at("members")) {
    std::string id = m.at("id").get<std::string>();
    if (id.size() > 34) id = "..." + id.substr(id.size() - 31);
    std::cout << std::left << std::setw(36) << id << std::right;
    if (m.at("status") != "ok") {
      std::cout << " FAILED " << m.at("error").at("message").get<std::string>() << "\n";
      continue;
    }
    std::cout << " " << fmt(m.at("labeled_stage").at("target_accuracy")) << " " << fmt(m.at("target_accuracy"))
              << " " << fmt(m.at("validation_accuracy")) << "\n";
  }
  std::cout << "\nensemble (" << report.at("ensemble").at("num_members") << " members, primary "
            << report.at("ensemble").at("combiner").get<std::string>() << ")\n";
  for (const auto& [name, acc] : report.at("ensemble").at("accuracy").items()) {
    std::cout << "  " << std::left << std::setw(32) << name << std::right << fmt(acc) << "\n";
  }
  if (report.contains("timing")) {
    std::cout << "\ntotal " << std::fixed << std::setprecision(0) << report.at("timing").at("total_ms").get<double>()
              << " ms\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pace: covariance alignment, self-training and ensembling on fixed features"};
  app.require_subcommand(1);

  // synth
  pace::SynthConfig synth;
  std::string synth_out;
  std::size_t synth_members = 1;
  double synth_sigma = 0.0;
  auto* synth_cmd = app.add_subcommand("synth", "write a seeded synthetic domain-shift bundle");
  synth_cmd->add_option("--out", synth_out, "output directory")->required();
  synth_cmd->add_option("--seed", synth.seed, "random seed");
  synth_cmd->add_option("--classes", synth.num_classes, "class count K");
  synth_cmd->add_option("--dim", synth.dim, "feature dimension d");
  synth_cmd->add_option("--n-source", synth.n_source, "source sample count");
  synth_cmd->add_option("--n-target", synth.n_target, "target sample count");
  synth_cmd->add_option("--separation", synth.separation, "class mean norm");
  synth_cmd->add_option("--noise", synth.noise, "within-class standard deviation");
  synth_cmd->add_option("--condition-cap", synth.condition_cap, "condition number cap of the domain map");
  synth_cmd->add_option("--shift", synth.shift_scale, "norm of the target mean shift");
  synth_cmd->add_option("--rotation", synth.rotation_angle, "rotation angle of the domain map (radians)");
  synth_cmd->add_option("--prior-ratio", synth.prior_ratio, "target class imbalance ratio");
  synth_cmd->add_option("--shots", synth.shots, "labeled target samples per class");
  synth_cmd->add_option("--val", synth.val_per_class, "validation samples per class");
  synth_cmd->add_option("--members", synth_members, "write this many noise-perturbed member bundles");
  synth_cmd->add_option("--sigma", synth_sigma, "member feature noise");

  // align
  ConfigOptions align_opts;
  std::string align_in, align_out, align_method;
  auto* align_cmd = app.add_subcommand("align", "align a bundle (coral, padd or none)");
  align_cmd->add_option("--bundle", align_in, "input bundle directory")->required();
  align_cmd->add_option("--out", align_out, "output bundle directory")->required();
  align_cmd->add_option("--aligner", align_method, "none | coral | padd");
  add_config_options(align_cmd, align_opts);

  // train
  ConfigOptions train_opts;
  std::string train_in, train_out;
  auto* train_cmd = app.add_subcommand("train", "labeled-data training on an aligned bundle");
  train_cmd->add_option("--bundle", train_in, "aligned bundle directory")->required();
  train_cmd->add_option("--out", train_out, "classifier checkpoint to write")->required();
  add_config_options(train_cmd, train_opts);

  // selftrain
  ConfigOptions st_opts;
  std::string st_in, st_init, st_out, st_trace;
  auto* st_cmd = app.add_subcommand("selftrain", "self-train a classifier on an aligned bundle");
  st_cmd->add_option("--bundle", st_in, "aligned bundle directory")->required();
  st_cmd->add_option("--init", st_init, "initial classifier checkpoint")->required();
  st_cmd->add_option("--out", st_out, "classifier checkpoint to write")->required();
  st_cmd->add_option("--trace", st_trace, "write per-round JSON lines here");
  add_config_options(st_cmd, st_opts);

  // eval
  std::string eval_in, eval_weights;
  auto* eval_cmd = app.add_subcommand("eval", "accuracy of a checkpoint on an aligned bundle");
  eval_cmd->add_option("--bundle", eval_in, "aligned bundle directory")->required();
  eval_cmd->add_option("--weights", eval_weights, "classifier checkpoint")->required();

  // run
  ConfigOptions run_opts;
  std::vector<std::string> run_members;
  std::string run_aligner, run_combiner, run_out, run_trace, run_predictions;
  std::size_t run_threads = 0;
  auto* run_cmd = app.add_subcommand("run", "full pipeline over one or more member bundles");
  add_config_options(run_cmd, run_opts);
  run_cmd->add_option("--member", run_members, "member bundle directory (repeatable)");
  run_cmd->add_option("--aligner", run_aligner, "none | coral | padd");
  run_cmd->add_option("--combiner", run_combiner, "primary ensemble combiner");
  run_cmd->add_option("--threads", run_threads, "concurrent members");
  run_cmd->add_option("--out", run_out, "report JSON path (stdout when omitted)");
  run_cmd->add_option("--trace", run_trace, "write per-round JSON lines here");
  run_cmd->add_option("--predictions", run_predictions, "write ensemble labels (.pacl or .csv)");

  // report
  std::string report_in;
  bool report_strip = false;
  auto* report_cmd = app.add_subcommand("report", "summarize a run report");
  report_cmd->add_option("--in", report_in, "report JSON")->required();
  report_cmd->add_flag("--strip-timing", report_strip, "print the report JSON without timing fields");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth_cmd) {
      const pace::DataBundle base = pace::generate(synth);
      if (synth_members <= 1 && synth_sigma == 0.0) {
        pace::save_bundle(base, synth_out);
      } else {
        for (std::size_t i = 0; i < std::max<std::size_t>(1, synth_members); ++i) {
          const std::uint64_t member_seed = synth.seed * 1000003ULL + i + 1;
          pace::save_bundle(pace::perturb_member(base, synth_sigma, member_seed),
                            fs::path(synth_out) / ("member-" + std::to_string(i)));
        }
      }
    } else if (*align_cmd) {
      std::vector<pace::Setting> flags;
      if (!align_method.empty()) flags.emplace_back("aligner", align_method);
      const auto cfg = load_config(align_opts, flags);
      pace::save_bundle(pace::align_bundle(pace::load_bundle(align_in), cfg), align_out);
    } else if (*train_cmd) {
      const auto cfg = load_config(train_opts);
      const auto bundle = pace::detail::normalize_bundle(pace::load_bundle(train_in));
      const auto clf = pace::train_labeled(bundle, cfg.alpha0, cfg.beta0, cfg.labeled_gd());
      pace::save_classifier(clf.weights, train_out);
      nlohmann::json j = evaluation(clf.weights, bundle);
      j["loss_start"] = clf.trace.losses.front();
      j["loss_end"] = clf.trace.final_loss;
      std::cout << j.dump(2) << "\n";
    } else if (*st_cmd) {
      const auto cfg = load_config(st_opts);
      const auto bundle = pace::detail::normalize_bundle(pace::load_bundle(st_in));
      const auto result = pace::self_train(pace::load_classifier(st_init), bundle, cfg.schedule);
      pace::save_classifier(result.classifier.weights, st_out);
      if (!st_trace.empty()) {
        pace::RunReport r;
        pace::MemberResult m;
        m.id = st_in;
        m.rounds = result.trace;
        r.members.push_back(std::move(m));
        write_text(st_trace, pace::trace_jsonl(r));
      }
      std::cout << evaluation(result.classifier.weights, bundle).dump(2) << "\n";
    } else if (*eval_cmd) {
      const auto bundle = pace::detail::normalize_bundle(pace::load_bundle(eval_in));
      std::cout << evaluation(pace::load_classifier(eval_weights), bundle).dump(2) << "\n";
    } else if (*run_cmd) {
      std::vector<pace::Setting> flags;
      if (!run_aligner.empty()) flags.emplace_back("aligner", run_aligner);
      if (!run_combiner.empty()) flags.emplace_back("combiner", run_combiner);
      if (run_threads) flags.emplace_back("parallelism", std::to_string(run_threads));
      for (const auto& m : run_members) flags.emplace_back("member", m);
      const auto cfg = load_config(run_opts, flags);
      const pace::RunReport report = pace::run_pipeline(cfg);
      const std::string doc = pace::to_json(report).dump(2) + "\n";
      if (run_out.empty()) std::cout << doc;
      else write_text(run_out, doc);
      if (!run_trace.empty()) write_text(run_trace, pace::trace_jsonl(report));
      if (!run_predictions.empty() && report.predictions) pace::save_labels(*report.predictions, run_predictions);
      if (!report.predictions) {
        for (const auto& m : report.members) {
          if (m.failure) return pace::exit_code(m.failure->kind);
        }
      }
    } else if (*report_cmd) {
      nlohmann::json report;
      try {
        report = nlohmann::json::parse(read_text(report_in));
      } catch (const nlohmann::json::exception& e) {
        throw pace::FormatError(report_in + ": " + e.what());
      }
      if (report_strip) {
        report.erase("timing");
        std::cout << report.dump(2) << "\n";
      } else {
        print_report_summary(report);
      }
    }
  } catch (const pace::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return pace::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
