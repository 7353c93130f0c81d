#include "cascade/run_config.hpp"

#include <yaml-cpp/yaml.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace cascade {
namespace {

class Reader {
 public:
  Reader(std::string source, std::filesystem::path base) : source_(std::move(source)), base_(std::move(base)) {}

  [[noreturn]] void fail(const YAML::Node& node, const std::string& what) const {
    const auto mark = node.Mark();
    const std::string at = mark.line >= 0 ? ":" + std::to_string(mark.line + 1) : std::string();
    throw ValidationError(source_ + at + ": " + what);
  }

  template <typename T>
  T get(const YAML::Node& parent, const char* key, const T& fallback) const {
    const auto node = parent[key];
    if (!node) return fallback;
    try {
      return node.as<T>();
    } catch (const YAML::Exception&) {
      fail(node, std::string("invalid value for '") + key + "'");
    }
  }

  template <typename T>
  std::optional<T> opt(const YAML::Node& parent, const char* key) const {
    if (!parent[key]) return std::nullopt;
    return get<T>(parent, key, T{});
  }

  std::filesystem::path path(const YAML::Node& parent, const char* key) const {
    const auto value = get<std::string>(parent, key, "");
    if (value.empty()) fail(parent, std::string("missing '") + key + "'");
    std::filesystem::path p(value);
    return p.is_absolute() ? p : base_ / p;
  }

  template <typename Fn>
  auto enumerated(const YAML::Node& parent, const char* key, Fn&& parse, decltype(parse("")) fallback) const {
    const auto node = parent[key];
    if (!node) return fallback;
    try {
      return parse(node.as<std::string>());
    } catch (const ValidationError& e) {
      fail(node, e.what());
    }
  }

 private:
  std::string source_;
  std::filesystem::path base_;
};

void check_keys(const Reader& r, const YAML::Node& node, std::initializer_list<std::string_view> allowed,
                std::string_view section) {
  if (!node.IsMap()) r.fail(node, std::string(section) + " must be a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    bool ok = false;
    for (auto a : allowed) ok = ok || a == key;
    if (!ok) r.fail(kv.first, "unknown key '" + key + "' in " + std::string(section));
  }
}

}  // namespace

std::string_view backend_kind(const BackendSpec& spec) {
  return std::visit(
      [](const auto& b) -> std::string_view {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, OracleBackend>) return "oracle";
        else if constexpr (std::is_same_v<T, FirstPickBackend>) return "first_pick";
        else if constexpr (std::is_same_v<T, ReplayBackend>) return "replay";
        else return "remote";
      },
      spec);
}

RunConfig parse_run_config(const std::string& yaml_text, const std::filesystem::path& base_dir,
                           const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::ParserException& e) {
    throw ValidationError(source + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  const Reader r(source, base_dir);
  if (!root.IsMap()) throw ValidationError(source + ": config must be a mapping");
  check_keys(r, root, {"manifest", "cascade", "backend", "evaluation", "output_dir", "max_in_flight"}, "config");

  RunConfig cfg;
  cfg.source = source;
  cfg.manifest = r.path(root, "manifest");
  if (!std::filesystem::exists(cfg.manifest)) r.fail(root["manifest"], "manifest " + cfg.manifest.string() + " not found");

  if (const auto c = root["cascade"]) {
    check_keys(r, c,
               {"k", "tau", "temperature", "few_shot", "shots_per_class", "candidate_order", "seed", "parse_policy",
                "zero_shot_template", "few_shot_template", "explain", "prompt_noun"},
               "cascade");
    auto& cc = cfg.cascade;
    cc.k = r.get<std::size_t>(c, "k", cc.k);
    cc.tau = r.get<double>(c, "tau", cc.tau);
    cc.temperature = r.get<double>(c, "temperature", cc.temperature);
    cc.few_shot = r.get<bool>(c, "few_shot", cc.few_shot);
    cc.shots_per_class = r.get<std::size_t>(c, "shots_per_class", cc.shots_per_class);
    cc.seed = r.get<std::uint64_t>(c, "seed", cc.seed);
    cc.explain = r.get<bool>(c, "explain", cc.explain);
    cc.prompt_noun = r.get<std::string>(c, "prompt_noun", cc.prompt_noun);
    cc.candidate_order = r.enumerated(c, "candidate_order", parse_candidate_order, cc.candidate_order);
    cc.parse_policy = r.enumerated(c, "parse_policy", parse_parse_policy, cc.parse_policy);
    cc.zero_shot_template = r.enumerated(c, "zero_shot_template", parse_prompt_template, cc.zero_shot_template);
    cc.few_shot_template = r.enumerated(c, "few_shot_template", parse_prompt_template, cc.few_shot_template);
    try {
      cc.validate();
    } catch (const ValidationError& e) {
      r.fail(c, e.what());
    }
  }

  const auto b = root["backend"];
  if (!b) throw ValidationError(source + ": missing 'backend' section");
  check_keys(r, b, {"oracle", "first_pick", "replay", "remote"}, "backend");
  if (b.size() != 1) r.fail(b, "exactly one backend section is required, found " + std::to_string(b.size()));
  if (const auto o = b["oracle"]) {
    OracleBackend ob;
    if (o.IsMap()) {
      check_keys(r, o, {"in_candidate_accuracy"}, "backend.oracle");
      ob.in_candidate_accuracy = r.get<double>(o, "in_candidate_accuracy", 1.0);
    }
    if (!(ob.in_candidate_accuracy >= 0.0 && ob.in_candidate_accuracy <= 1.0))
      r.fail(o, "in_candidate_accuracy must lie in [0,1]");
    cfg.backend = ob;
  } else if (b["first_pick"]) {
    cfg.backend = FirstPickBackend{};
  } else if (const auto rp = b["replay"]) {
    check_keys(r, rp, {"path"}, "backend.replay");
    ReplayBackend rb{r.path(rp, "path")};
    if (!std::filesystem::exists(rb.path)) r.fail(rp, "replay file " + rb.path.string() + " not found");
    cfg.backend = rb;
  } else {
    const auto rm = b["remote"];
    check_keys(r, rm,
               {"endpoint_url", "model", "max_tokens", "timeout_ms", "max_retries", "record_path", "inline_images",
                "backoff_base_ms", "backoff_max_ms"},
               "backend.remote");
    RemoteBackend rb;
    auto& e = rb.endpoint;
    e.url = r.get<std::string>(rm, "endpoint_url", "");
    if (e.url.empty()) r.fail(rm, "missing 'endpoint_url'");
    e.model = r.get<std::string>(rm, "model", "");
    e.max_tokens = r.get<int>(rm, "max_tokens", e.max_tokens);
    e.timeout_ms = r.get<int>(rm, "timeout_ms", e.timeout_ms);
    e.max_retries = r.get<int>(rm, "max_retries", e.max_retries);
    e.backoff_base_ms = r.get<double>(rm, "backoff_base_ms", e.backoff_base_ms);
    e.backoff_max_ms = r.get<double>(rm, "backoff_max_ms", e.backoff_max_ms);
    e.inline_images = r.get<bool>(rm, "inline_images", e.inline_images);
    if (rm["record_path"]) rb.record_path = r.path(rm, "record_path");
    if (const char* key = std::getenv(kApiKeyEnv)) e.api_key = key;
    cfg.backend = rb;
  }

  cfg.cascade.refiner_ref = std::string(backend_kind(cfg.backend));

  if (const auto ev = root["evaluation"]) {
    check_keys(r, ev, {"taus", "ks", "base_latency_ms", "refine_latency_ms"}, "evaluation");
    cfg.evaluation.taus = r.get<std::vector<double>>(ev, "taus", {});
    cfg.evaluation.ks = r.get<std::vector<std::size_t>>(ev, "ks", {});
    cfg.evaluation.base_latency_ms = r.opt<double>(ev, "base_latency_ms");
    cfg.evaluation.refine_latency_ms = r.opt<double>(ev, "refine_latency_ms");
  }
  if (root["output_dir"]) cfg.output_dir = r.path(root, "output_dir");
  else cfg.output_dir = base_dir / "out";
  cfg.max_in_flight = r.get<std::size_t>(root, "max_in_flight", 1);
  if (cfg.max_in_flight == 0) r.fail(root["max_in_flight"], "max_in_flight must be at least 1");
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.parent_path(), path.string());
}

void override_backend(RunConfig& config, std::string_view kind) {
  if (kind == backend_kind(config.backend)) return;
  if (kind == "oracle") {
    config.backend = OracleBackend{};
  } else if (kind == "first_pick") {
    config.backend = FirstPickBackend{};
  } else if (kind == "replay") {
    const auto* remote = std::get_if<RemoteBackend>(&config.backend);
    if (remote == nullptr || !remote->record_path)
      throw ValidationError("--backend replay needs a replay section or a remote record_path");
    if (!std::filesystem::exists(*remote->record_path))
      throw ValidationError("replay file " + remote->record_path->string() + " not found");
    config.backend = ReplayBackend{*remote->record_path};
  } else if (kind == "remote") {
    throw ValidationError("--backend remote needs a remote section in the config");
  } else {
    throw ValidationError("unknown backend '" + std::string(kind) + "'");
  }
  // A replay reproduces the recorded refiner, so the logical refiner id is kept.
  if (kind != "replay") config.cascade.refiner_ref = std::string(kind);
}

BuiltBackend build_backend(const RunConfig& config) {
  BuiltBackend out;
  std::visit(
      [&](const auto& b) {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, OracleBackend>) {
          out.refiner = std::make_unique<OracleRefiner>(b.in_candidate_accuracy);
        } else if constexpr (std::is_same_v<T, FirstPickBackend>) {
          out.refiner = std::make_unique<FirstPickRefiner>();
        } else if constexpr (std::is_same_v<T, ReplayBackend>) {
          out.refiner = std::make_unique<ReplayRefiner>(ReplayRefiner::from_file(b.path));
        } else {
          if (b.record_path) {
            out.recorder = std::make_shared<ReplayRecorder>();
            out.record_path = b.record_path;
          }
          out.refiner = std::make_unique<RemoteRefiner>(b.endpoint, out.recorder);
        }
      },
      config.backend);
  return out;
}

}  // namespace cascade
