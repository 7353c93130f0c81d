#include "cascade/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>

#include "CLI11.hpp"
#include "cascade/data.hpp"
#include "cascade/engine.hpp"
#include "cascade/evaluation.hpp"
#include "cascade/report_io.hpp"
#include "cascade/run_config.hpp"

namespace cascade::cli {
namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> tau;
  std::optional<std::size_t> k;
  std::optional<std::string> backend;
  std::optional<std::string> out;
  std::optional<std::size_t> max_in_flight;
  std::optional<std::string> order;
};

struct Loaded {
  RunConfig config;
  DatasetManifest manifest;
  Dataset data;
  ExemplarBank exemplars;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "Run configuration (YAML)")->required();
  cmd->add_option("--seed", o.seed, "Override cascade.seed");
  cmd->add_option("--tau", o.tau, "Override cascade.tau (nats)");
  cmd->add_option("--k", o.k, "Override cascade.k");
  cmd->add_option("--backend", o.backend, "Override backend kind: oracle, first_pick, replay, remote");
  cmd->add_option("--out", o.out, "Override output_dir");
  cmd->add_option("--max-in-flight", o.max_in_flight, "Override max_in_flight");
  cmd->add_option("--order", o.order, "Override cascade.candidate_order");
}

RunConfig load_config(const Overrides& o) {
  auto cfg = load_run_config(o.config);
  if (o.seed) cfg.cascade.seed = *o.seed;
  if (o.tau) cfg.cascade.tau = *o.tau;
  if (o.k) cfg.cascade.k = *o.k;
  if (o.order) cfg.cascade.candidate_order = parse_candidate_order(*o.order);
  if (o.backend) override_backend(cfg, *o.backend);
  if (o.out) cfg.output_dir = *o.out;
  if (o.max_in_flight) cfg.max_in_flight = *o.max_in_flight;
  if (cfg.max_in_flight == 0) throw ValidationError("--max-in-flight must be at least 1");
  cfg.cascade.validate();
  return cfg;
}

Loaded load_all(const Overrides& o) {
  Loaded l{load_config(o), {}, {}, {}};
  l.manifest = load_manifest(l.config.manifest);
  l.data = load_dataset(l.manifest);
  if (l.data.records.empty()) throw ValidationError(l.manifest.scores_path.string() + ": no records");
  for (const auto& r : l.data.records) validate_record(r, l.data.labels);
  if (l.config.cascade.few_shot) {
    l.exemplars = build_exemplar_bank(l.manifest, l.data.labels, l.config.cascade.shots_per_class, l.config.cascade.seed);
  }
  return l;
}

void warn_clamped(const Loaded& l, std::size_t k, std::ostream& err) {
  if (k > l.data.labels.size()) {
    err << "warning: k=" << k << " exceeds the " << l.data.labels.size() << " classes; candidate sets are clamped\n";
  }
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_report_files(const EvalReport& report, const RunConfig& cfg, const std::filesystem::path& json_path,
                        const std::filesystem::path& csv_dir) {
  auto doc = report_to_json(report);
  doc["metadata"] = {{"generated_at", utc_now()}, {"backend", backend_kind(cfg.backend)}, {"config", cfg.source.string()}};
  ensure_directory(json_path.parent_path());
  std::ofstream out(json_path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + json_path.string());
  out << doc.dump(2) << '\n';
  emit_report(report, csv_dir, ReportFormat::kCsvBundle);
}

std::string pct(const Rate& r) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << r.value() << " (" << r.hits << "/" << r.total << ")";
  return s.str();
}

int cmd_validate(const Overrides& o, std::ostream& out, std::ostream& err) {
  const auto l = load_all(o);
  const auto& cc = l.config.cascade;
  double lo = INFINITY, hi = -INFINITY, sum = 0.0;
  for (const auto& r : l.data.records) {
    const double h = entropy(softmax(r.raw_scores, cc.temperature));
    lo = std::min(lo, h);
    hi = std::max(hi, h);
    sum += h;
  }
  warn_clamped(l, cc.k, err);
  out << "dataset: " << l.manifest.name << " (" << (l.manifest.split == Split::kTest ? "test" : "validation") << ")\n";
  out << "items: " << l.data.records.size() << "\n";
  out << "classes: " << l.data.labels.size() << " (ln = " << std::log(static_cast<double>(l.data.labels.size()))
      << ")\n";
  out << "entropy: min " << lo << " mean " << sum / static_cast<double>(l.data.records.size()) << " max " << hi
      << " (nats, temperature " << cc.temperature << ")\n";
  out << "backend: " << backend_kind(l.config.backend) << "\n";
  out << "k: " << cc.k << ", tau: " << cc.tau << ", order: " << to_string(cc.candidate_order)
      << ", few_shot: " << (cc.few_shot ? "yes" : "no") << "\n";
  out << "ok\n";
  return kExitOk;
}

int cmd_run(const Overrides& o, std::ostream& out, std::ostream& err) {
  const auto l = load_all(o);
  const auto& cfg = l.config;
  warn_clamped(l, cfg.cascade.k, err);
  auto backend = build_backend(cfg);
  const ExemplarBank* bank = cfg.cascade.few_shot ? &l.exemplars : nullptr;

  std::vector<Prediction> predictions;
  try {
    predictions = classify_batch(l.data.records, l.data.labels, cfg.cascade, *backend.refiner, bank, cfg.max_in_flight);
  } catch (...) {
    if (backend.recorder && backend.record_path) backend.recorder->write(*backend.record_path);
    throw;
  }
  out << "classified " << predictions.size() << " items\n";
  if (backend.recorder && backend.record_path) backend.recorder->write(*backend.record_path);

  const auto cost = resolve_cost_model(predictions, cfg.evaluation.base_latency_ms, cfg.evaluation.refine_latency_ms);
  const auto report = evaluate(predictions, l.data.records, cfg.cascade, cost, cfg.evaluation.ks);

  ensure_directory(cfg.output_dir);
  {
    std::ofstream pf(cfg.output_dir / "predictions.jsonl", std::ios::binary | std::ios::trunc);
    if (!pf) throw RuntimeFailure("cannot write predictions to " + cfg.output_dir.string());
    write_predictions(pf, predictions, l.data.labels);
  }
  write_report_files(report, cfg, cfg.output_dir / "report.json", cfg.output_dir / "report_csv");

  out << "base top-1: " << pct(report.top1_base) << "\n";
  out << "base top-" << cfg.cascade.k << ": " << pct(report.topk_base) << "\n";
  out << "cascade accuracy: " << pct(report.cascade_accuracy) << "\n";
  out << "fraction refined: " << pct(report.refined) << "\n";
  out << report.refiner_calls << " refiner calls, " << report.parse_fallbacks << " parse fallbacks, "
      << report.refiner_errors << " refiner errors\n";
  out << "estimated throughput: " << report.est_throughput << " items/s\n";
  out << "wrote " << (cfg.output_dir / "report.json").string() << "\n";
  return kExitOk;
}

int cmd_sweep(const Overrides& o, const std::string& param, std::ostream& out, std::ostream& err) {
  const auto l = load_all(o);
  const auto& cfg = l.config;
  if (param == "tau" && cfg.evaluation.taus.empty()) throw ValidationError("evaluation.taus is empty");
  if (param == "k" && cfg.evaluation.ks.empty()) throw ValidationError("evaluation.ks is empty");
  auto backend = build_backend(cfg);
  const ExemplarBank* bank = cfg.cascade.few_shot ? &l.exemplars : nullptr;

  const auto predictions =
      classify_batch(l.data.records, l.data.labels, cfg.cascade, *backend.refiner, bank, cfg.max_in_flight);
  const auto cost = resolve_cost_model(predictions, cfg.evaluation.base_latency_ms, cfg.evaluation.refine_latency_ms);
  auto report = evaluate(predictions, l.data.records, cfg.cascade, cost, cfg.evaluation.ks);
  report.sweep_param = param;
  if (param == "tau") {
    report.sweep_curve = sweep_tau(l.data.records, l.data.labels, cfg.evaluation.taus, cfg.cascade, *backend.refiner,
                                   bank, cost, cfg.max_in_flight);
  } else {
    for (auto k : cfg.evaluation.ks) warn_clamped(l, k, err);
    report.sweep_curve = sweep_k(l.data.records, l.data.labels, cfg.evaluation.ks, cfg.cascade, *backend.refiner, bank,
                                 cost, cfg.max_in_flight);
  }
  if (backend.recorder && backend.record_path) backend.recorder->write(*backend.record_path);

  write_report_files(report, cfg, cfg.output_dir / ("sweep_" + param + ".json"),
                     cfg.output_dir / ("sweep_" + param + "_csv"));
  out << param << ",accuracy,fraction_refined,refiner_calls,est_throughput\n";
  for (const auto& p : report.sweep_curve) {
    out << p.param << ',' << p.accuracy.value() << ',' << p.refined.value() << ',' << p.refiner_calls << ','
        << p.est_throughput << '\n';
  }
  out << "wrote " << (cfg.output_dir / ("sweep_" + param + ".json")).string() << "\n";
  return kExitOk;
}

struct AnalyzeArgs {
  std::optional<std::string> config;
  std::optional<std::string> scores;
  std::optional<std::string> labels;
  std::vector<std::string> predictions;
  std::string analysis;
  std::optional<std::string> out;
  std::optional<double> temperature;
};

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out) {
  LabelSet labels;
  std::vector<ScoreRecord> records;
  double temperature = 1.0;
  if (a.config) {
    const auto cfg = load_run_config(*a.config);
    auto data = load_dataset(load_manifest(cfg.manifest));
    labels = std::move(data.labels);
    records = std::move(data.records);
    temperature = cfg.cascade.temperature;
  } else {
    if (!a.scores || !a.labels) throw ValidationError("analyze needs --config or both --scores and --labels");
    labels = load_label_set(*a.labels);
    records = load_scores(*a.scores, labels);
  }
  if (a.temperature) temperature = *a.temperature;

  std::vector<std::vector<Prediction>> runs;
  for (const auto& path : a.predictions) runs.push_back(load_predictions(path, labels));

  if (a.analysis == "margin") {
    if (runs.size() != 1) throw ValidationError("margin analysis takes exactly one --predictions file");
    const auto buckets = margin_analysis(runs[0], records, temperature);
    out << "lo,hi,n,base_accuracy,cascade_accuracy,gap\n";
    std::size_t total = 0;
    const auto fmt = [](const std::optional<double>& v) {
      if (!v) return std::string("-");
      std::ostringstream s;
      s << std::fixed << std::setprecision(4) << *v;
      return s.str();
    };
    for (const auto& b : buckets) {
      total += b.n;
      out << b.lo << ',' << b.hi << ',' << b.n << ',' << fmt(b.base_accuracy()) << ',' << fmt(b.cascade_accuracy())
          << ',' << fmt(b.gap()) << '\n';
    }
    out << "items: " << total << "\n";
    if (a.out) {
      EvalReport r;
      r.margin_buckets = buckets;
      r.n_items = total;
      emit_report(r, *a.out, ReportFormat::kCsvBundle);
    }
    return kExitOk;
  }
  if (a.analysis == "errors") {
    if (runs.size() != 1) throw ValidationError("error analysis takes exactly one --predictions file");
    // Alignment check against the records.
    margin_analysis(runs[0], records, temperature);
    const auto e = error_analysis(runs[0]);
    std::size_t refined_wrong = 0, wrong = 0;
    for (const auto& p : runs[0]) {
      wrong += p.correct() ? 0 : 1;
      refined_wrong += (!p.correct() && p.stage == Stage::kRefined) ? 1 : 0;
    }
    out << "base_wrong_early_exit: " << e.base_wrong_early_exit << "\n";
    out << "refined_wrong_truth_absent: " << e.refined_wrong_truth_absent << "\n";
    out << "refined_wrong_truth_present: " << e.refined_wrong_truth_present << "\n";
    out << "total_errors: " << wrong << " (refined " << refined_wrong << ")\n";
    if (a.out) {
      EvalReport r;
      r.error_buckets = e;
      emit_report(r, *a.out, ReportFormat::kCsvBundle);
    }
    return kExitOk;
  }
  if (a.analysis == "orders") {
    std::map<std::string, Rate> acc;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      margin_analysis(runs[i], records, temperature);
      std::set<CandidateOrder> orders;
      Rate rate;
      for (const auto& p : runs[i]) {
        orders.insert(p.candidate_order);
        ++rate.total;
        rate.hits += p.correct() ? 1 : 0;
      }
      if (orders.size() != 1) throw ValidationError(a.predictions[i] + " mixes candidate orders");
      const auto name = std::string(to_string(*orders.begin()));
      if (acc.count(name)) throw ValidationError("two prediction files for order " + name);
      acc[name] = rate;
    }
    std::vector<std::string> missing;
    for (auto o : {CandidateOrder::kSortedDesc, CandidateOrder::kShuffled, CandidateOrder::kReversed})
      if (!acc.count(std::string(to_string(o)))) missing.emplace_back(to_string(o));
    if (!missing.empty()) {
      std::string msg = "orders analysis needs one run per candidate order; missing:";
      for (const auto& m : missing) msg += " " + m;
      msg += ". Produce them with `cascade-cli run --config <cfg> --order <order> --out <dir>` and pass each "
             "predictions.jsonl via --predictions";
      throw ValidationError(msg);
    }
    const double sorted = acc.at("sorted_desc").value();
    out << "order,accuracy,hits,total,delta_vs_sorted\n";
    for (const auto& [name, r] : acc)
      out << name << ',' << r.value() << ',' << r.hits << ',' << r.total << ',' << r.value() - sorted << '\n';
    if (a.out) {
      EvalReport r;
      r.order_accuracy = acc;
      emit_report(r, *a.out, ReportFormat::kCsvBundle);
    }
    return kExitOk;
  }
  throw ValidationError("unknown analysis '" + a.analysis + "' (expected margin, errors or orders)");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-stage cascade classifier: entropy-gated refinement of base-scorer predictions"};
  app.require_subcommand(1);

  Overrides validate_o, run_o, sweep_o;
  auto* validate = app.add_subcommand("validate", "Check config, manifest and data; print a summary");
  add_common(validate, validate_o);
  auto* run_cmd = app.add_subcommand("run", "Classify every item and write predictions and a report");
  add_common(run_cmd, run_o);
  auto* sweep = app.add_subcommand("sweep", "Sweep tau or k over the configured grid");
  add_common(sweep, sweep_o);
  std::string param;
  sweep->add_option("--param", param, "tau or k")->required()->check(CLI::IsMember({"tau", "k"}));

  AnalyzeArgs analyze_args;
  auto* analyze = app.add_subcommand("analyze", "Recompute an analysis from persisted predictions");
  analyze->add_option("--config", analyze_args.config, "Run configuration (for the dataset manifest)");
  analyze->add_option("--scores", analyze_args.scores, "Scores file (instead of --config)");
  analyze->add_option("--labels", analyze_args.labels, "Label set file (instead of --config)");
  analyze->add_option("--predictions", analyze_args.predictions, "Predictions file(s)")->required();
  analyze->add_option("--analysis", analyze_args.analysis, "margin, errors or orders")->required();
  analyze->add_option("--out", analyze_args.out, "Write CSV tables into this directory");
  analyze->add_option("--temperature", analyze_args.temperature, "Softmax temperature for base accuracy");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }

  try {
    if (*validate) return cmd_validate(validate_o, out, err);
    if (*run_cmd) return cmd_run(run_o, out, err);
    if (*sweep) return cmd_sweep(sweep_o, param, out, err);
    if (*analyze) return cmd_analyze(analyze_args, out);
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const RefinerError& e) {
    err << "backend error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace cascade::cli
