#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <list>
#include <sstream>

#include <CLI11.hpp>

#include "sra/attack.hpp"
#include "sra/cli.hpp"
#include "sra/error.hpp"
#include "sra/guard.hpp"
#include "sra/synth.hpp"

namespace sra::cli {

namespace fs = std::filesystem;
using nlohmann::json;

json default_config() {
  AttackConfig attack;
  json a = attack.to_json();
  a.erase("seed");
  a.erase("retrain");
  a["budget_pct"] = 2.0;
  a["budget_fakes"] = nullptr;  // absolute count; overrides budget_pct when set
  RecConfig model;
  StudyConfig study;
  PartitionConfig part;
  return {
      {"seed", 7},
      {"dataset", {{"name", "lastfm"}, {"synth_seed", 7}, {"interactions", ""}, {"social", ""},
                   {"test_fraction", 0.2}}},
      {"partition", {{"walks_per_node", part.walks_per_node}, {"walk_length", part.walk_length},
                     {"dim", part.skipgram.dim}, {"window", part.skipgram.window},
                     {"negatives", part.skipgram.negatives}, {"epochs", part.skipgram.epochs},
                     {"lr", part.skipgram.lr}, {"kmeans_iters", part.kmeans_iters}}},
      {"model", {{"variant", to_string(model.variant)}, {"dim", model.dim},
                 {"depth", model.depth}, {"l2", model.l2}, {"init_std", model.init_std},
                 {"sage_scale", model.sage_scale}}},
      {"train", {{"epochs", 300}, {"lr", 0.01}, {"l2", 1e-4}, {"batch_size", 0}}},
      {"target", ""},
      {"attack", a},
      {"preliminary", {{"study", "filler-popularity"}, {"fakes", study.fakes},
                       {"profile_length", study.profile_length}, {"groups", study.groups},
                       {"cold_quantile", study.cold_quantile}, {"spy_count", study.spy_count},
                       {"trend_every", study.trend_every}}},
      {"detect", {{"k", 20}, {"threshold", 1.5}, {"fakes", ""}}},
      {"defend", {{"eps", 0.5}, {"strategy", "random"}}},
      {"report", {{"inputs", json::array()}, {"subject", "multi"}}},
  };
}

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::InvalidInput, "cannot read " + path.string());
  std::uint64_t h = 1469598103934665603ULL;
  char buf[1 << 14];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

namespace {

// ---------------------------------------------------------------------------
// Pipeline stages shared by the subcommands

struct Context {
  const json& cfg;
  fs::path dir;
  std::ostream& log;
  json inputs = json::object();
  std::vector<std::string> outputs;

  std::uint64_t seed() const { return cfg.at("seed").get<std::uint64_t>(); }
  std::uint64_t sub(const char* name) const { return SeedStream(seed()).child(name).seed(); }

  void write(const std::string& name, const std::string& text) {
    std::ofstream f(dir / name, std::ios::binary);
    require(static_cast<bool>(f), ErrorKind::InvalidInput, "cannot write " + (dir / name).string());
    f << text;
    outputs.push_back(name);
  }
  void write(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }
};

Dataset load_data(Context& cx) {
  const auto& d = cx.cfg.at("dataset");
  const auto inter = d.at("interactions").get<std::string>();
  const auto social = d.at("social").get<std::string>();
  Dataset ds;
  if (!inter.empty() || !social.empty()) {
    require(!inter.empty() && !social.empty(), ErrorKind::Usage,
            "--interactions and --social must be given together");
    require(fs::exists(inter), ErrorKind::Usage, "missing input " + inter);
    require(fs::exists(social), ErrorKind::Usage, "missing input " + social);
    ds = load_dataset_files(inter, social);
    cx.inputs["interactions"] = file_digest(inter);
    cx.inputs["social"] = file_digest(social);
  } else {
    const auto name = d.at("name").get<std::string>();
    require(name == "lastfm", ErrorKind::Usage,
            "no built-in dataset '" + name + "'; pass --interactions and --social");
    ds = synthesize(lastfm_analog(), d.at("synth_seed").get<std::uint64_t>());
  }
  cx.inputs["dataset"] = ds.digest();
  return ds;
}

Split make_split(const Context& cx, const Dataset& ds) {
  return split_interactions(ds, cx.cfg.at("dataset").at("test_fraction").get<double>(),
                            cx.sub("split"));
}

PartitionResult make_partition(const Context& cx, const Dataset& ds) {
  const auto& p = cx.cfg.at("partition");
  PartitionConfig pc;
  pc.walks_per_node = p.at("walks_per_node");
  pc.walk_length = p.at("walk_length");
  pc.skipgram.dim = p.at("dim");
  pc.skipgram.window = p.at("window");
  pc.skipgram.negatives = p.at("negatives");
  pc.skipgram.epochs = p.at("epochs");
  pc.skipgram.lr = p.at("lr");
  pc.kmeans_iters = p.at("kmeans_iters");
  return partition_social(ds.user_count, ds.social, pc, cx.sub("walks"));
}

RecConfig model_config(const Context& cx) {
  const auto& m = cx.cfg.at("model");
  RecConfig rc;
  rc.variant = parse_variant(m.at("variant").get<std::string>());
  rc.dim = m.at("dim");
  rc.depth = m.at("depth");
  rc.l2 = m.at("l2");
  rc.init_std = m.at("init_std");
  rc.sage_scale = m.at("sage_scale");
  return rc;
}

TrainOptions train_options(const Context& cx) {
  const auto& t = cx.cfg.at("train");
  TrainOptions o;
  o.epochs = t.at("epochs");
  o.lr = t.at("lr");
  o.l2 = t.at("l2");
  o.batch_size = t.at("batch_size");
  o.seed = cx.sub("train");
  return o;
}

RecModel fresh_model(const Context& cx, const Dataset& ds, const Split& split) {
  RecModel model(model_config(cx), ds.user_count, ds.item_count, cx.sub("target"));
  model.attach(split.train_by_user, ds.friends());
  return model;
}

RecModel make_target(Context& cx, const Dataset& ds, const Split& split) {
  const auto path = cx.cfg.at("target").get<std::string>();
  if (!path.empty()) {
    require(fs::exists(path), ErrorKind::Usage, "missing target model " + path);
    RecModel model = RecModel::from_archive(TensorArchive::load(path));
    require(model.user_count() == ds.user_count && model.item_count() == ds.item_count,
            ErrorKind::InvalidInput, "target model does not match the dataset");
    model.attach(split.train_by_user, ds.friends());
    model.set_trained(true);
    cx.inputs["target"] = file_digest(path);
    return model;
  }
  cx.log << "training target (" << cx.cfg["train"]["epochs"] << " epochs)\n";
  RecModel model = fresh_model(cx, ds, split);
  train(model, split, ds, train_options(cx));
  return model;
}

AttackConfig attack_config(const Context& cx, std::size_t users) {
  const auto& a = cx.cfg.at("attack");
  AttackConfig c = AttackConfig::from_json(a);
  c.seed = cx.seed();
  c.budget.max_fake_users = a.at("budget_fakes").is_null()
                                ? budget_from_percent(a.at("budget_pct").get<double>(), users)
                                : a.at("budget_fakes").get<std::size_t>();
  c.retrain = train_options(cx);
  return c;
}

std::string csv_body(const std::string& csv) {
  const auto nl = csv.find('\n');
  return nl == std::string::npos ? std::string() : csv.substr(nl + 1);
}

std::string metrics_csv(const std::vector<const MetricsReport*>& reports) {
  std::string out = "label,metric,k,value\n";
  for (const auto* r : reports) out += csv_body(r->to_csv());
  return out;
}

std::vector<FakeUser> fakes_from_json(const json& j) {
  std::vector<FakeUser> fakes;
  for (const auto& f : j) {
    FakeUser fk;
    fk.items = f.at("items").get<std::vector<ItemId>>();
    for (const auto& p : f.at("pairs")) fk.pairs.emplace_back(p.at(0), p.at(1));
    fakes.push_back(std::move(fk));
  }
  return fakes;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Usage, "cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Subcommands

void cmd_ingest(Context& cx) {
  const auto ds = load_data(cx);
  write_dataset_files(cx.dir, ds);
  cx.outputs.push_back("interactions.tsv");
  cx.outputs.push_back("social.tsv");
  const auto s = ds.summary();
  cx.write("summary.json", s);
  std::ostringstream csv;
  csv << std::setprecision(10) << "key,value\n";
  for (const auto& [k, v] : s.items()) {
    csv << k << ',' << (v.is_string() ? v.get<std::string>() : v.dump()) << '\n';
  }
  cx.write("summary.csv", csv.str());
}

void cmd_partition(Context& cx) {
  const auto ds = load_data(cx);
  const auto parts = make_partition(cx, ds);
  cx.write("partition.json", parts.partition.to_json());
  cx.write("louvain.json", parts.louvain.to_json());
  std::ostringstream csv;
  csv << "user,kmeans,louvain\n";
  for (std::size_t u = 0; u < ds.user_count; ++u) {
    csv << u << ',' << parts.partition.assignment[u] << ',' << parts.louvain.assignment[u] << '\n';
  }
  cx.write("communities.csv", csv.str());
  std::ostringstream sum;
  sum << std::setprecision(10) << "method,n_c,modularity\n"
      << "kmeans," << parts.partition.n_c << ',' << parts.partition.modularity << '\n'
      << "louvain," << parts.louvain.n_c << ',' << parts.louvain.modularity << '\n';
  cx.write("partition_summary.csv", sum.str());
}

void cmd_train_target(Context& cx) {
  const auto ds = load_data(cx);
  const auto split = make_split(cx, ds);
  RecModel model = fresh_model(cx, ds, split);
  auto report = train(model, split, ds, train_options(cx));
  model.to_archive().save(cx.dir / "model.bin");
  cx.outputs.push_back("model.bin");
  std::ostringstream log;
  log << std::setprecision(12);
  for (std::size_t e = 0; e < report.epoch_loss.size(); ++e) {
    log << json{{"epoch", e}, {"loss", report.epoch_loss[e]}}.dump() << '\n';
  }
  cx.write("train_log.jsonl", log.str());
  const auto clean = evaluate_view(model.view(), split, ds.user_count, "clean");
  cx.write("metrics.csv", clean.to_csv());
  cx.write("metrics.json", clean.to_json());
}

void cmd_attack(Context& cx) {
  const auto ds = load_data(cx);
  const auto split = make_split(cx, ds);
  const auto parts = make_partition(cx, ds);
  const auto target = make_target(cx, ds, split);
  const auto config = attack_config(cx, ds.user_count);
  const auto env = make_attack_env(ds, split, target, parts, config);
  std::ofstream train_log;
  std::ostream* log = nullptr;
  if (is_learned(config.strategy)) {
    train_log.open(cx.dir / "train_log.jsonl");
    cx.outputs.push_back("train_log.jsonl");
    log = &train_log;
  }
  cx.log << "attack " << to_string(config.strategy) << " with " << config.budget.max_fake_users
         << " fake users\n";
  const auto result = run_attack(config, env, log);
  const auto audit = audit_fakes(result.fakes, env.partition, config.budget, ds.user_count,
                                 ds.item_count, !config.ablations.community_mask_off);
  json rj = result.to_json();
  rj["mode"] = to_string(config.mode);
  rj["audit"] = audit.to_json();
  cx.write("result.json", rj);
  cx.write("fakes.json", result.fakes_json());
  cx.write("metrics.csv", metrics_csv({&result.before, &result.after}));
  std::ostringstream rc;
  rc << std::setprecision(10) << "query,reward\n";
  for (std::size_t i = 0; i < result.reward_curve.size(); ++i) {
    rc << i << ',' << result.reward_curve[i] << '\n';
  }
  cx.write("reward_curve.csv", rc.str());
  require(audit.ok(), ErrorKind::BudgetViolation,
          "emitted fakes violate constraints: " +
              (audit.messages.empty() ? std::string("?") : audit.messages.front()));
}

void cmd_preliminary(Context& cx) {
  const auto ds = load_data(cx);
  const auto split = make_split(cx, ds);
  const auto& p = cx.cfg.at("preliminary");
  const Study study = parse_study(p.at("study").get<std::string>());
  StudyConfig sc;
  sc.fakes = p.at("fakes");
  sc.profile_length = p.at("profile_length");
  sc.groups = p.at("groups");
  sc.cold_quantile = p.at("cold_quantile");
  sc.spy_count = p.at("spy_count");
  sc.trend_every = p.at("trend_every");
  sc.train = train_options(cx);
  sc.model = model_config(cx);
  StudyReport report;
  if (study == Study::ColdHitTrend) {
    report = run_preliminary(study, ds, split, nullptr, sc, cx.seed());
  } else {
    const auto target = make_target(cx, ds, split);
    report = run_preliminary(study, ds, split, &target, sc, cx.seed());
  }
  cx.write("study.json", report.to_json());
  cx.write("study.csv", report.to_csv());
}

void cmd_detect(Context& cx) {
  const auto ds = load_data(cx);
  const auto& d = cx.cfg.at("detect");
  const auto path = d.at("fakes").get<std::string>();
  std::vector<FakeUser> fakes;
  if (!path.empty()) {
    fakes = fakes_from_json(read_json(path));
    cx.inputs["fakes"] = file_digest(path);
  } else {
    const auto split = make_split(cx, ds);
    const auto parts = make_partition(cx, ds);
    const auto target = make_target(cx, ds, split);
    const auto config = attack_config(cx, ds.user_count);
    fakes = run_attack(config, make_attack_env(ds, split, target, parts, config)).fakes;
  }
  Budget budget;
  budget.max_fake_users = fakes.size();
  for (const auto& f : fakes) budget.profile_length = std::max(budget.profile_length, f.items.size());
  const auto polluted = inject_poison(ds, fakes, budget);
  DetectionConfig dc;
  dc.k = d.at("k");
  dc.threshold = d.at("threshold");
  const auto report = detect_anomalies(polluted, ds.user_count, dc);
  cx.write("detection.json", report.to_json());
  cx.write("detection.csv", report.to_csv());
}

void cmd_defend(Context& cx) {
  const auto ds = load_data(cx);
  const auto split = make_split(cx, ds);
  const auto parts = make_partition(cx, ds);
  const double eps = cx.cfg.at("defend").at("eps");
  auto config = attack_config(cx, ds.user_count);
  config.strategy = parse_strategy(cx.cfg.at("defend").at("strategy").get<std::string>());

  const auto plain = make_target(cx, ds, split);
  cx.log << "adversarial training (eps " << eps << ")\n";
  RecModel robust = fresh_model(cx, ds, split);
  adversarial_train(robust, split, ds, eps, train_options(cx));

  std::ostringstream csv;
  csv << std::setprecision(10) << "target,eps,metric,k,clean,attacked,drop\n";
  json summary = json::object();
  for (const auto* entry : {&plain, static_cast<const RecModel*>(&robust)}) {
    const std::string name = entry == &plain ? "plain" : "robust";
    const double e = entry == &plain ? 0.0 : eps;
    const auto env = make_attack_env(ds, split, *entry, parts, config);
    const auto result = run_attack(config, env);
    const auto imp = evaluate_attack(result.before, result.after, result.before);
    for (const char* metric : {"NDCG", "Recall", "Precision"}) {
      for (auto k : kReportCutoffs) {
        const std::string key = std::string(metric) + "@" + std::to_string(k);
        const auto it = imp.drop_vs_clean.find(key);
        csv << name << ',' << e << ',' << metric << ',' << k << ',' << result.before.at(metric, k)
            << ',' << result.after.at(metric, k) << ',';
        if (it != imp.drop_vs_clean.end()) csv << it->second;
        csv << '\n';
      }
    }
    summary[name] = {{"eps", e}, {"before", result.before.to_json()},
                     {"after", result.after.to_json()}, {"drop", imp.drop_vs_clean}};
  }
  cx.write("defense.csv", csv.str());
  cx.write("defense.json", summary);
}

void cmd_report(Context& cx) {
  const auto& r = cx.cfg.at("report");
  const auto inputs = r.at("inputs").get<std::vector<std::string>>();
  require(!inputs.empty(), ErrorKind::Usage, "report: pass at least one attack run via --inputs");
  const auto subject = r.at("subject").get<std::string>();
  struct Row {
    std::string strategy;
    MetricsReport after;
  };
  std::vector<Row> rows;
  MetricsReport clean;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    fs::path p = inputs[i];
    if (fs::is_directory(p)) p /= "result.json";
    require(fs::exists(p), ErrorKind::Usage, "report: missing " + p.string());
    const auto j = read_json(p);
    cx.inputs["input" + std::to_string(i)] = file_digest(p);
    const auto before = MetricsReport::from_json(j.at("before"));
    if (i == 0) {
      clean = before;
    } else {
      require(before.values == clean.values, ErrorKind::InvalidInput,
              "report: inputs were attacked on different clean targets");
    }
    rows.push_back({j.at("strategy").get<std::string>(), MetricsReport::from_json(j.at("after"))});
  }
  const Row* best = nullptr;
  for (const auto& row : rows) {
    if (row.strategy == subject) continue;
    if (!best || row.after.at("NDCG", 10) < best->after.at("NDCG", 10)) best = &row;
  }
  std::ostringstream csv;
  csv << std::setprecision(10) << "strategy,metric,k,clean,attacked,drop,improvement\n";
  json summary = {{"subject", subject}, {"best_baseline", best ? json(best->strategy) : json()}};
  for (const auto& row : rows) {
    const auto imp = evaluate_attack(clean, row.after, best ? best->after : row.after);
    for (const char* metric : {"NDCG", "Recall", "Precision"}) {
      for (auto k : kReportCutoffs) {
        const std::string key = std::string(metric) + "@" + std::to_string(k);
        if (!clean.values.count(key)) continue;
        csv << row.strategy << ',' << metric << ',' << k << ',' << clean.values.at(key) << ','
            << row.after.values.at(key) << ',';
        if (auto it = imp.drop_vs_clean.find(key); it != imp.drop_vs_clean.end()) csv << it->second;
        csv << ',';
        if (best) {
          if (auto it = imp.gain_vs_baseline.find(key); it != imp.gain_vs_baseline.end()) {
            csv << it->second;
          }
        }
        csv << '\n';
      }
    }
  }
  cx.write("table.csv", csv.str());
  cx.write("report.json", summary);
}

// ---------------------------------------------------------------------------
// Argument handling

const char* const kSubcommands[] = {"ingest",      "partition", "train-target", "attack",
                                    "preliminary", "detect",    "defend",       "report"};

const std::map<std::string, std::string> kAbout{
    {"ingest", "Load or synthesize a dataset and summarize it"},
    {"partition", "Community partition of the social graph"},
    {"train-target", "Train the target recommender"},
    {"attack", "Run one attack strategy and evaluate it"},
    {"preliminary", "Filler-popularity, connection-type or cold-hit-trend study"},
    {"detect", "LOF detection of injected fake users"},
    {"defend", "Attack a plain and an adversarially trained target"},
    {"report", "Compare attack runs against the best baseline"},
};

struct Bound {
  std::string pointer;
  char type;  // s string, i integer, r real, b flag, v string list
  std::string value;
  std::vector<std::string> values;
  bool flag = false;
  CLI::Option* option = nullptr;
};

json convert(const Bound& b) {
  try {
    switch (b.type) {
      case 'i': {
        std::size_t used = 0;
        const auto v = std::stoull(b.value, &used);
        require(used == b.value.size(), ErrorKind::Usage, "not an integer: " + b.value);
        return v;
      }
      case 'r': {
        std::size_t used = 0;
        const double v = std::stod(b.value, &used);
        require(used == b.value.size(), ErrorKind::Usage, "not a number: " + b.value);
        return v;
      }
      case 'b': return true;
      case 'v': return b.values;
      default: return b.value;
    }
  } catch (const std::logic_error&) {
    fail(ErrorKind::Usage, "bad value '" + b.value + "' for " + b.pointer);
  }
}

void check_keys(const json& defaults, const json& patch, const std::string& where) {
  if (!patch.is_object() || !defaults.is_object()) return;
  for (const auto& [k, v] : patch.items()) {
    require(defaults.contains(k), ErrorKind::InvalidConfig,
            "unknown config key '" + where + "/" + k + "'");
    if (k != "inputs") check_keys(defaults[k], v, where + "/" + k);
  }
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

fs::path make_run_dir(const std::string& base, std::uint64_t seed) {
  const fs::path root = base.empty() ? fs::path(std::getenv("SRA_RUN_DIR") ? std::getenv("SRA_RUN_DIR") : "runs")
                                     : fs::path(base);
  const std::string stem = timestamp() + "-seed" + std::to_string(seed);
  fs::path dir = root / stem;
  for (int i = 2; fs::exists(dir); ++i) dir = root / (stem + "-" + std::to_string(i));
  fs::create_directories(dir);
  return dir;
}

int exit_code(ErrorKind kind) { return kind == ErrorKind::Usage ? 2 : 1; }

}  // namespace

std::vector<std::string> execute(const std::string& subcommand, const json& config,
                                 const fs::path& dir, std::ostream& log, json* inputs) {
  Context cx{config, dir, log, json::object(), {}};
  if (subcommand == "ingest") cmd_ingest(cx);
  else if (subcommand == "partition") cmd_partition(cx);
  else if (subcommand == "train-target") cmd_train_target(cx);
  else if (subcommand == "attack") cmd_attack(cx);
  else if (subcommand == "preliminary") cmd_preliminary(cx);
  else if (subcommand == "detect") cmd_detect(cx);
  else if (subcommand == "defend") cmd_defend(cx);
  else if (subcommand == "report") cmd_report(cx);
  else fail(ErrorKind::Usage, "unknown subcommand '" + subcommand + "'");
  if (inputs) *inputs = cx.inputs;
  return cx.outputs;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Untargeted injection attacks on social recommenders"};
  app.require_subcommand(0, 1);
  std::string run_dir;
  std::string manifest_path;
  app.add_option("--run-dir", run_dir, "Run directory root (default $SRA_RUN_DIR or runs)");
  app.add_option("--from-manifest", manifest_path, "Replay the run recorded in a manifest");

  std::map<std::string, std::list<Bound>> bound;
  std::map<std::string, std::string> config_path;
  auto opt = [&](CLI::App* sub, const std::string& flag, const std::string& pointer, char type,
                 const std::string& help) -> CLI::Option* {
    auto& b = bound[sub->get_name()].emplace_back();
    b.pointer = pointer;
    b.type = type;
    if (type == 'b') b.option = sub->add_flag(flag, b.flag, help);
    else if (type == 'v') b.option = sub->add_option(flag, b.values, help);
    else b.option = sub->add_option(flag, b.value, help);
    return b.option;
  };
  for (const char* name : kSubcommands) {
    auto* sub = app.add_subcommand(name, kAbout.at(name));
    sub->add_option("--config", config_path[name], "JSON config merged over the defaults");
    opt(sub, "--seed", "/seed", 'i', "Master seed");
    const std::string n = name;
    if (n != "report") {
      opt(sub, "--dataset", "/dataset/name", 's', "Built-in dataset (lastfm)");
      opt(sub, "--interactions", "/dataset/interactions", 's', "User-item file");
      opt(sub, "--social", "/dataset/social", 's', "User-user file");
      opt(sub, "--test-fraction", "/dataset/test_fraction", 'r', "Held-out fraction");
    }
    if (n == "train-target" || n == "attack" || n == "preliminary" || n == "detect" ||
        n == "defend") {
      opt(sub, "--target", "/target", 's', "Trained model archive (train-target output)");
      opt(sub, "--epochs", "/train/epochs", 'i', "Target training epochs");
      opt(sub, "--lr", "/train/lr", 'r', "Target learning rate");
      opt(sub, "--variant", "/model/variant", 's', "mf-bpr | sbpr | social-lgn | sage-lite");
    }
    if (n == "attack" || n == "detect" || n == "defend") {
      opt(sub, "--strategy", "/attack/strategy", 's', "multi | double | multi-social | random | cold | pop | degree | poisonrec-untargeted");
      opt(sub, "--mode", "/attack/mode", 's', "evasion | poison");
      opt(sub, "--budget-pct", "/attack/budget_pct", 'r', "Fake users as a percentage of users");
      opt(sub, "--budget", "/attack/budget_fakes", 'i', "Absolute fake-user count");
      opt(sub, "--profile-length", "/attack/budget/profile_length", 'i', "Steps per fake user (T)");
      opt(sub, "--passes", "/attack/passes", 'i', "RL passes over the budget");
      opt(sub, "--spies", "/attack/spy_count", 'i', "Spy users");
      opt(sub, "--cadence", "/attack/cadence", 'i', "Injections per reward query");
      opt(sub, "--community-mask-off", "/attack/ablations/community_mask_off", 'b', "Allow intra-community pairs");
      opt(sub, "--louvain-only", "/attack/ablations/louvain_only", 'b', "Louvain partition for the agents");
      opt(sub, "--multiagent-off", "/attack/ablations/multiagent_off", 'b', "Single flat agent");
      opt(sub, "--cold-pool-off", "/attack/ablations/cold_pool_off", 'b', "Item agent over all items");
    }
    if (n == "preliminary") {
      opt(sub, "--study", "/preliminary/study", 's', "filler-popularity | connection-type | cold-hit-trend");
      opt(sub, "--fakes", "/preliminary/fakes", 'i', "Injected fake users");
      opt(sub, "--trend-every", "/preliminary/trend_every", 'i', "Epochs between cold-hit samples");
    }
    if (n == "detect") {
      opt(sub, "--fakes", "/detect/fakes", 's', "fakes.json from an attack run");
      opt(sub, "--k", "/detect/k", 'i', "LOF neighbours");
      opt(sub, "--threshold", "/detect/threshold", 'r', "LOF score threshold");
    }
    if (n == "defend") {
      opt(sub, "--eps", "/defend/eps", 'r', "Adversarial perturbation radius");
      opt(sub, "--attack", "/defend/strategy", 's', "Attack probing both targets");
    }
    if (n == "report") {
      opt(sub, "--inputs", "/report/inputs", 'v', "Attack run directories")->expected(-1);
      opt(sub, "--subject", "/report/subject", 's', "Strategy compared against the best baseline");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  std::string subcommand;
  json config;
  try {
    if (!manifest_path.empty()) {
      require(app.get_subcommands().empty(), ErrorKind::Usage,
              "--from-manifest replays a run; do not name a subcommand");
      const auto m = read_json(manifest_path);
      subcommand = m.at("subcommand").get<std::string>();
      config = m.at("config");
    } else {
      require(!app.get_subcommands().empty(), ErrorKind::Usage,
              "name a subcommand or pass --from-manifest (see --help)");
      subcommand = app.get_subcommands().front()->get_name();
      config = default_config();
      if (const auto& path = config_path[subcommand]; !path.empty()) {
        const auto patch = read_json(path);
        check_keys(config, patch, "");
        config.merge_patch(patch);
      }
      for (const auto& b : bound[subcommand]) {
        if (b.option->count() > 0) config[json::json_pointer(b.pointer)] = convert(b);
      }
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  }

  const auto start = std::chrono::steady_clock::now();
  const std::string started = timestamp();
  fs::path dir;
  try {
    dir = make_run_dir(run_dir, config.at("seed").get<std::uint64_t>());
  } catch (const std::exception& e) {
    err << "error: cannot create run directory: " << e.what() << '\n';
    return 1;
  }
  json manifest = {{"subcommand", subcommand}, {"config", config}, {"seed", config["seed"]},
                   {"started", started}};
  int status = 0;
  try {
    json inputs;
    manifest["outputs"] = execute(subcommand, config, dir, err, &inputs);
    manifest["inputs"] = inputs;
    manifest["status"] = "ok";
  } catch (const Error& e) {
    manifest["status"] = "failed";
    manifest["error"] = {{"kind", to_string(e.kind())}, {"message", e.what()}};
    err << "error: " << e.what() << '\n';
    status = exit_code(e.kind());
  } catch (const std::exception& e) {
    manifest["status"] = "failed";
    manifest["error"] = {{"kind", "internal"}, {"message", e.what()}};
    err << "error: " << e.what() << '\n';
    status = 1;
  }
  manifest["seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
  out << dir.string() << '\n';
  return status;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.push_back("sra");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace sra::cli
