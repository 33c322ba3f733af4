#include "una/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>
#include <vector>

#include "una/dataset.hpp"
#include "una/verify.hpp"
#include "vendor/json.hpp"

namespace una::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// --- small parsing / formatting helpers --------------------------------------

std::string trim(const std::string& s) {
  const auto from = s.find_first_not_of(" \t\r\n");
  if (from == std::string::npos) return "";
  const auto to = s.find_last_not_of(" \t\r\n");
  return s.substr(from, to - from + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (value.empty() || end != value.c_str() + value.size()) {
    throw ValidationError(key + " expects a number, got '" + value + "'");
  }
  return v;
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
  if (value.empty() || end != value.c_str() + value.size() || value[0] == '-') {
    throw ValidationError(key + " expects a non-negative integer, got '" + value + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ValidationError(key + " expects true or false, got '" + value + "'");
}

// shortest decimal form that parses back to the same double
std::string fmt_double(double v) {
  char buf[40];
  std::string best;
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v && (best.empty() || std::strlen(buf) < best.size())) {
      best = buf;
    }
  }
  return best;
}

std::string fmt_hash(uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string iso_utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// --- config key table ---------------------------------------------------------

struct KeySpec {
  const char* key;
  void (*apply)(RunOptions&, const std::string&);
  std::string (*render)(const RunOptions&);
};

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs = {
      {"loss_kind",
       [](RunOptions& o, const std::string& v) { o.train.loss_kind = parse_loss_kind(v); },
       [](const RunOptions& o) { return loss_kind_name(o.train.loss_kind); }},
      {"beta",
       [](RunOptions& o, const std::string& v) { o.train.beta = Beta(parse_double("beta", v)); },
       [](const RunOptions& o) { return fmt_double(o.train.beta.value); }},
      {"step_size",
       [](RunOptions& o, const std::string& v) { o.train.step_size = parse_double("step_size", v); },
       [](const RunOptions& o) { return fmt_double(o.train.step_size); }},
      {"steps",
       [](RunOptions& o, const std::string& v) { o.train.steps = parse_u64("steps", v); },
       [](const RunOptions& o) { return std::to_string(o.train.steps); }},
      {"batch_size",
       [](RunOptions& o, const std::string& v) { o.train.batch_size = parse_u64("batch_size", v); },
       [](const RunOptions& o) { return std::to_string(o.train.batch_size); }},
      {"seed",
       [](RunOptions& o, const std::string& v) { o.train.seed = parse_u64("seed", v); },
       [](const RunOptions& o) { return std::to_string(o.train.seed); }},
      {"eval_every",
       [](RunOptions& o, const std::string& v) { o.train.eval_every = parse_u64("eval_every", v); },
       [](const RunOptions& o) { return std::to_string(o.train.eval_every); }},
      {"grad_norm_cap",
       [](RunOptions& o, const std::string& v) {
         if (v == "none") o.train.grad_norm_cap.reset();
         else o.train.grad_norm_cap = parse_double("grad_norm_cap", v);
       },
       [](const RunOptions& o) {
         return o.train.grad_norm_cap ? fmt_double(*o.train.grad_norm_cap) : std::string("none");
       }},
      {"compare_as",
       [](RunOptions& o, const std::string& v) {
         if (v == "reward_mse") o.train.compare_as = CompareAs::RewardMse;
         else if (v == "score_mse") o.train.compare_as = CompareAs::ScoreMse;
         else throw ValidationError("compare_as expects reward_mse or score_mse, got '" + v + "'");
       },
       [](const RunOptions& o) {
         return std::string(o.train.compare_as == CompareAs::RewardMse ? "reward_mse" : "score_mse");
       }},
      {"score_min",
       [](RunOptions& o, const std::string& v) {
         o.train.score_bounds.min_raw = parse_double("score_min", v);
       },
       [](const RunOptions& o) { return fmt_double(o.train.score_bounds.min_raw); }},
      {"score_max",
       [](RunOptions& o, const std::string& v) {
         o.train.score_bounds.max_raw = parse_double("score_max", v);
       },
       [](const RunOptions& o) { return fmt_double(o.train.score_bounds.max_raw); }},
      {"pg_estimator",
       [](RunOptions& o, const std::string& v) {
         if (v == "sampled") o.train.pg_estimator = PgEstimator::Sampled;
         else if (v == "exact") o.train.pg_estimator = PgEstimator::Exact;
         else throw ValidationError("pg_estimator expects sampled or exact, got '" + v + "'");
       },
       [](const RunOptions& o) {
         return std::string(o.train.pg_estimator == PgEstimator::Sampled ? "sampled" : "exact");
       }},
      {"track_grad_variance",
       [](RunOptions& o, const std::string& v) {
         o.train.track_grad_variance = parse_bool("track_grad_variance", v);
       },
       [](const RunOptions& o) { return std::string(o.train.track_grad_variance ? "true" : "false"); }},
      {"policy",
       [](RunOptions& o, const std::string& v) {
         if (v == "tabular") o.policy_kind = Policy::Kind::Tabular;
         else if (v == "parametric") o.policy_kind = Policy::Kind::Parametric;
         else throw ValidationError("policy expects tabular or parametric, got '" + v + "'");
       },
       [](const RunOptions& o) {
         return std::string(o.policy_kind == Policy::Kind::Tabular ? "tabular" : "parametric");
       }},
      {"vocab_size",
       [](RunOptions& o, const std::string& v) {
         o.vocab.size = static_cast<uint32_t>(parse_u64("vocab_size", v));
       },
       [](const RunOptions& o) { return std::to_string(o.vocab.size); }},
      {"max_len",
       [](RunOptions& o, const std::string& v) {
         o.vocab.max_len = static_cast<uint32_t>(parse_u64("max_len", v));
       },
       [](const RunOptions& o) { return std::to_string(o.vocab.max_len); }},
      {"init",
       [](RunOptions& o, const std::string& v) {
         if (v == "uniform") o.random_init = false;
         else if (v == "random") o.random_init = true;
         else throw ValidationError("init expects uniform or random, got '" + v + "'");
       },
       [](const RunOptions& o) { return std::string(o.random_init ? "random" : "uniform"); }},
      {"init_scale",
       [](RunOptions& o, const std::string& v) { o.init_scale = parse_double("init_scale", v); },
       [](const RunOptions& o) { return fmt_double(o.init_scale); }},
      {"init_seed",
       [](RunOptions& o, const std::string& v) { o.init_seed = parse_u64("init_seed", v); },
       [](const RunOptions& o) { return std::to_string(o.init_seed); }},
      {"reward_table",
       [](RunOptions& o, const std::string& v) { o.reward_table = v; },
       [](const RunOptions& o) { return o.reward_table; }},
  };
  return specs;
}

void validate_options(const RunOptions& o) {
  o.train.validate();
  o.vocab.validate();
  if (!(o.init_scale >= 0.0) || !std::isfinite(o.init_scale)) {
    throw ValidationError("init_scale must be finite and non-negative");
  }
}

// --- exit-code classification -------------------------------------------------

bool is_validation(const Error& e) {
  return dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const ParseError*>(&e) ||
         dynamic_cast<const SchemaError*>(&e) || dynamic_cast<const OutOfRange*>(&e) ||
         dynamic_cast<const EmptyFile*>(&e) || dynamic_cast<const MissingArtifact*>(&e) ||
         dynamic_cast<const KindMismatch*>(&e) || dynamic_cast<const VocabMismatch*>(&e) ||
         dynamic_cast<const MalformedResponse*>(&e) || dynamic_cast<const UnknownPrompt*>(&e) ||
         dynamic_cast<const MissingEntry*>(&e) || dynamic_cast<const WrongFeedbackKind*>(&e) ||
         dynamic_cast<const EmptyBatch*>(&e) || dynamic_cast<const CheckpointError*>(&e);
}

int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_validation(e) ? kExitValidation : kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

// --- file helpers -------------------------------------------------------------

std::string read_text_file(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw MissingArtifact(std::string(what) + " not found: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out.good()) throw Error("cannot write " + path);
}

json load_json_file(const std::string& path, const char* what) {
  const std::string text = read_text_file(path, what);
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ParseError(std::string(what) + " is not valid JSON: " + path);
  return j;
}

// --- training plumbing --------------------------------------------------------

struct PolicyPair {
  Policy pi0;
  Policy ref;
};

PolicyPair build_policies(const RunOptions& opts, const std::vector<Prompt>& prompts) {
  std::vector<uint32_t> ids;
  uint32_t max_id = 0;
  for (const Prompt& x : prompts) {
    ids.push_back(x.id);
    max_id = std::max(max_id, x.id);
  }
  if (opts.policy_kind == Policy::Kind::Tabular) {
    auto set = ResponseSet::enumerate_all(opts.vocab);
    Policy ref = Policy::uniform_tabular(ids, set).frozen_clone();
    Policy pi0 = opts.random_init
                     ? Policy::random_tabular(ids, set, opts.init_seed, opts.init_scale)
                     : Policy::uniform_tabular(ids, set);
    return PolicyPair{std::move(pi0), std::move(ref)};
  }
  const uint32_t num_prompts = max_id + 1;
  Policy ref = Policy::zero_parametric(opts.vocab, num_prompts).frozen_clone();
  Policy pi0 = opts.random_init
                   ? Policy::random_parametric(opts.vocab, num_prompts, opts.init_seed, opts.init_scale)
                   : Policy::zero_parametric(opts.vocab, num_prompts);
  return PolicyPair{std::move(pi0), std::move(ref)};
}

bool needs_reward_table(LossKind kind) {
  return kind == LossKind::UnaOnlineReward || kind == LossKind::UnaOnlineScore ||
         kind == LossKind::PgBaseline;
}

void save_trained_rm(const ExplicitRewardModel& rm, const std::string& path) {
  json j;
  j["format"] = "una-rm-bt";
  j["version"] = 1;
  j["num_prompts"] = rm.num_prompts();
  j["vocab"] = {{"size", rm.vocab().size}, {"max_len", rm.vocab().max_len}};
  j["weights"] = rm.params();
  write_text_file(path, j.dump(2) + "\n");
}

json manifest_skeleton(const RunOptions& opts, const std::string& config_path,
                       const std::string& data_path, const Dataset& data) {
  json m;
  m["format"] = "una-run-manifest";
  m["version"] = 1;
  json cfg;
  for (const KeySpec& spec : key_specs()) cfg[spec.key] = spec.render(opts);
  m["config"] = cfg;
  m["config_path"] = config_path;
  m["data_path"] = data_path;
  m["dataset"] = {{"content_hash", fmt_hash(data.content_hash)},
                  {"records", data.records.size()},
                  {"pairwise", data.num_pairwise},
                  {"binary", data.num_binary},
                  {"scalar", data.num_scalar}};
  m["seed"] = opts.train.seed;
  m["loss_kind"] = loss_kind_name(opts.train.loss_kind);
  m["started_at"] = iso_utc_now();
  m["finished_at"] = nullptr;
  m["status"] = "running";
  m["artifacts"] = json::object();
  m["total_ms"] = nullptr;
  return m;
}

// --- metrics csv reading (for cmd_report) ------------------------------------

constexpr const char* kMetricsHeader =
    "step,loss,kl,mean_r_theta_w,mean_r_theta_l,mean_s_theta_w,mean_s_theta_l,"
    "mean_explicit_reward,ms";
constexpr const char* kMetricNames[] = {"loss",
                                        "kl",
                                        "mean_r_theta_w",
                                        "mean_r_theta_l",
                                        "mean_s_theta_w",
                                        "mean_s_theta_l",
                                        "mean_explicit_reward",
                                        "ms"};

struct MetricsRow {
  uint64_t step = 0;
  double values[8] = {};
};

std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
  const std::string text = read_text_file(path, "metrics CSV");
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || trim(line) != kMetricsHeader) {
    throw SchemaError("unexpected metrics header in " + path);
  }
  std::vector<MetricsRow> rows;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 9) {
      throw SchemaError("line " + std::to_string(line_no) + ": expected 9 columns in " + path);
    }
    MetricsRow row;
    row.step = parse_u64("step", cells[0]);
    for (size_t i = 0; i < 8; ++i) {
      char* end = nullptr;
      row.values[i] = std::strtod(cells[i + 1].c_str(), &end);
      if (end != cells[i + 1].c_str() + cells[i + 1].size()) {
        throw SchemaError("line " + std::to_string(line_no) + ": bad number in " + path);
      }
    }
    rows.push_back(row);
  }
  if (rows.empty()) throw SchemaError("no metric rows in " + path);
  return rows;
}

double metric(const MetricsRow& row, const char* name) {
  for (size_t i = 0; i < 8; ++i) {
    if (std::strcmp(kMetricNames[i], name) == 0) return row.values[i];
  }
  return std::numeric_limits<double>::quiet_NaN();
}

bool run_dir_complete(const fs::path& dir) {
  return fs::exists(dir / "manifest.json") && fs::exists(dir / "metrics.csv");
}

json summarize_run(const fs::path& dir) {
  const json manifest = load_json_file((dir / "manifest.json").string(), "run manifest");
  const auto rows = read_metrics_csv((dir / "metrics.csv").string());
  const MetricsRow& first = rows.front();
  const MetricsRow& last = rows.back();
  json summary;
  summary["manifest"] = manifest;
  summary["eval_rows"] = rows.size();
  summary["initial"] = {{"step", first.step},
                        {"loss", metric(first, "loss")},
                        {"kl", metric(first, "kl")},
                        {"margin", metric(first, "mean_r_theta_w") - metric(first, "mean_r_theta_l")},
                        {"mean_explicit_reward", metric(first, "mean_explicit_reward")}};
  summary["final"] = {{"step", last.step},
                      {"loss", metric(last, "loss")},
                      {"kl", metric(last, "kl")},
                      {"margin", metric(last, "mean_r_theta_w") - metric(last, "mean_r_theta_l")},
                      {"mean_explicit_reward", metric(last, "mean_explicit_reward")}};
  return summary;
}

std::string long_format_csv(const std::vector<MetricsRow>& rows) {
  std::string out = "step,metric,value\n";
  char buf[64];
  for (const MetricsRow& row : rows) {
    for (size_t i = 0; i < 8; ++i) {
      std::snprintf(buf, sizeof buf, "%llu,%s,%.17g\n",
                    static_cast<unsigned long long>(row.step), kMetricNames[i], row.values[i]);
      out += buf;
    }
  }
  return out;
}

}  // namespace

// --- public surface -----------------------------------------------------------

std::string default_config_text() { return render_config(RunOptions{}); }

std::string render_config(const RunOptions& opts) {
  std::string out;
  for (const KeySpec& spec : key_specs()) {
    out += spec.key;
    out += '=';
    out += spec.render(opts);
    out += '\n';
  }
  return out;
}

RunOptions parse_run_options(const std::string& text) {
  RunOptions opts;
  std::istringstream in(text);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("config line " + std::to_string(line_no) + " is not key=value: '" +
                            stripped + "'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    const auto& specs = key_specs();
    const auto it = std::find_if(specs.begin(), specs.end(),
                                 [&](const KeySpec& s) { return key == s.key; });
    if (it == specs.end()) {
      throw ValidationError("unknown config key '" + key + "' (line " + std::to_string(line_no) + ")");
    }
    it->apply(opts, value);
  }
  validate_options(opts);
  return opts;
}

RunOptions load_run_options(const std::string& path) {
  return parse_run_options(read_text_file(path, "config file"));
}

unsigned verify_threads() {
  if (const char* env = std::getenv("UNA_LAB_THREADS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (*env == '\0' || *end != '\0' || v == 0 || v > 4096) {
      throw ValidationError("UNA_LAB_THREADS must be a positive integer");
    }
    return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

int cmd_train(const std::string& config_path, const std::string& data_path,
              const std::string& out_dir, std::optional<uint64_t> seed_override,
              std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    RunOptions opts = load_run_options(config_path);
    if (seed_override) opts.train.seed = *seed_override;

    IngestOptions iopts;
    iopts.bounds = opts.train.score_bounds;
    iopts.vocab = opts.vocab;
    const Dataset data = ingest(data_path, iopts);
    const std::vector<Prompt> prompts = unique_prompts(data);

    std::optional<ExplicitRewardModel> rm;
    if (needs_reward_table(opts.train.loss_kind)) {
      if (opts.reward_table.empty()) {
        throw ValidationError("reward_table must be set for " +
                              loss_kind_name(opts.train.loss_kind));
      }
      rm = ExplicitRewardModel::load_table_json(opts.reward_table);
    }

    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    json manifest = manifest_skeleton(opts, config_path, data_path, data);
    write_text_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");

    TrainReport report;
    json artifacts;
    artifacts["metrics_csv"] = "metrics.csv";
    if (opts.train.loss_kind == LossKind::RmBt) {
      const ExplicitRewardModel rm0 =
          ExplicitRewardModel::trainable_bt(prompts.back().id + 1, opts.vocab);
      auto [trained, rm_report] = train_reward_model(rm0, opts.train, data.records);
      report = std::move(rm_report);
      save_trained_rm(trained, (dir / "reward_model.json").string());
      artifacts["reward_model"] = "reward_model.json";
    } else {
      PolicyPair pair = build_policies(opts, prompts);
      switch (opts.train.loss_kind) {
        case LossKind::UnaOnlineReward:
        case LossKind::UnaOnlineScore:
          report = train_online_una(pair.pi0, pair.ref, opts.train, prompts, *rm);
          break;
        case LossKind::PgBaseline:
          report = train_policy_gradient_baseline(pair.pi0, pair.ref, opts.train, prompts, *rm);
          break;
        default:
          report = train_offline(pair.pi0, pair.ref, opts.train, data.records);
          break;
      }
      save_checkpoint(*report.final_policy, (dir / "policy.ckpt").string());
      artifacts["checkpoint"] = "policy.ckpt";
      artifacts["checkpoint_sidecar"] = "policy.ckpt.json";
    }
    write_metrics_csv(report, (dir / "metrics.csv").string());

    manifest["artifacts"] = artifacts;
    manifest["finished_at"] = iso_utc_now();
    manifest["status"] = "complete";
    manifest["total_ms"] = report.total_ms;
    write_text_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");

    const EvalRecord& last = report.last();
    out << "run complete: loss_kind=" << loss_kind_name(opts.train.loss_kind)
        << " steps=" << opts.train.steps << " final_loss=" << fmt_double(last.loss)
        << " final_kl=" << fmt_double(last.kl) << "\n";
    out << "artifacts in " << out_dir << "\n";
    return kExitSuccess;
  });
}

int cmd_verify(const std::string& suite, uint64_t seed, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    const verify::Suite which = verify::parse_suite(suite);
    const verify::SuiteReport report = verify::run_suite(which, seed, verify_threads(), ".");
    verify::print_report(report, out);
    size_t passed = 0;
    for (const auto& c : report.checks) passed += c.pass ? 1 : 0;
    out << "suite " << suite << ": " << passed << "/" << report.checks.size()
        << " checks passed (seed " << seed << ")\n";
    if (!report.all_pass()) {
      for (const auto& c : report.checks) {
        if (!c.pass) {
          err << "failed: " << c.name;
          if (!c.detail.empty()) err << " (" << c.detail << ")";
          err << "\n";
        }
      }
      return kExitPropertyFailure;
    }
    return kExitSuccess;
  });
}

int cmd_report(const std::string& run_dir, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    const fs::path dir(run_dir);
    if (!fs::is_directory(dir)) throw MissingArtifact("run directory not found: " + run_dir);

    if (run_dir_complete(dir)) {
      const json summary = summarize_run(dir);
      write_text_file((dir / "summary.json").string(), summary.dump(2) + "\n");
      write_text_file((dir / "long.csv").string(),
                      long_format_csv(read_metrics_csv((dir / "metrics.csv").string())));
      out << summary.dump(2) << "\n";
      out << "wrote " << (dir / "summary.json").string() << " and " << (dir / "long.csv").string()
          << "\n";
      return kExitSuccess;
    }

    // comparison mode: summarize every completed run one level down, keyed by
    // the beta each manifest echoes
    std::vector<fs::path> runs;
    if (fs::exists(dir)) {
      for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_directory() && run_dir_complete(entry.path())) runs.push_back(entry.path());
      }
    }
    if (runs.empty()) {
      throw MissingArtifact("no run artifacts (manifest.json + metrics.csv) under " + run_dir);
    }
    std::sort(runs.begin(), runs.end());

    struct RunRow {
      double beta;
      std::string name;
      MetricsRow last;
    };
    std::vector<RunRow> table;
    for (const fs::path& run : runs) {
      const json manifest = load_json_file((run / "manifest.json").string(), "run manifest");
      if (!manifest.contains("config") || !manifest["config"].contains("beta")) {
        throw SchemaError("manifest missing config.beta: " + run.string());
      }
      const auto rows = read_metrics_csv((run / "metrics.csv").string());
      table.push_back(RunRow{parse_double("beta", manifest["config"]["beta"].get<std::string>()),
                             run.filename().string(), rows.back()});
    }
    std::sort(table.begin(), table.end(), [](const RunRow& a, const RunRow& b) {
      return a.beta != b.beta ? a.beta < b.beta : a.name < b.name;
    });

    std::string csv = "beta,run,final_loss,final_kl,final_margin,final_mean_explicit_reward\n";
    char buf[160];
    for (const RunRow& row : table) {
      const double margin = metric(row.last, "mean_r_theta_w") - metric(row.last, "mean_r_theta_l");
      std::snprintf(buf, sizeof buf, "%.17g,%s,%.17g,%.17g,%.17g,%.17g\n", row.beta,
                    row.name.c_str(), metric(row.last, "loss"), metric(row.last, "kl"), margin,
                    metric(row.last, "mean_explicit_reward"));
      csv += buf;
    }
    write_text_file((dir / "comparison.csv").string(), csv);
    out << csv;
    out << "wrote " << (dir / "comparison.csv").string() << " (" << table.size() << " runs)\n";
    return kExitSuccess;
  });
}

int cmd_ingest(const std::string& data_path, const std::optional<std::string>& config_path,
               std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    IngestOptions iopts;
    if (config_path) {
      const RunOptions opts = load_run_options(*config_path);
      iopts.bounds = opts.train.score_bounds;
      iopts.vocab = opts.vocab;
    }
    const Dataset data = ingest(data_path, iopts);
    out << "records: " << data.records.size() << " (pairwise " << data.num_pairwise << ", binary "
        << data.num_binary << ", scalar " << data.num_scalar << ")\n";
    out << "content_hash: " << fmt_hash(data.content_hash) << "\n";
    out << "score_bounds: [" << fmt_double(data.bounds.min_raw) << ", "
        << fmt_double(data.bounds.max_raw) << "]\n";
    return kExitSuccess;
  });
}

}  // namespace una::cli
