// Copyright 2026 The Refgame Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "refgame/run.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "refgame/parallel.h"

namespace refgame {

namespace fs = std::filesystem;

namespace {

std::uint64_t StreamOf(std::string_view label) { return Fnv1a64(label); }

void RejectUnknownKeys(const nlohmann::json& j, std::initializer_list<const char*> known,
                       const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

// Every key of `given` must appear in the echoed `known` config.
void RejectKeysNotIn(const nlohmann::json& given, const nlohmann::json& known,
                     const std::string& where) {
  if (!given.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : given.items()) {
    if (!known.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
    if (value.is_object() && known.at(key).is_object())
      RejectKeysNotIn(value, known.at(key), where + "." + key);
  }
}

std::vector<std::string> StringList(const nlohmann::json& j, const std::string& key,
                                    std::vector<std::string> fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<std::vector<std::string>>();
}

}  // namespace

nlohmann::json EvalSettings::ToJson() const {
  return {{"n", n}, {"games", games}, {"blob_games", blob_games}, {"splits", splits}};
}

EvalSettings EvalSettings::FromJson(const nlohmann::json& j) {
  RejectUnknownKeys(j, {"n", "games", "blob_games", "splits"}, "eval");
  EvalSettings s;
  s.n = j.value("n", s.n);
  s.games = j.value("games", s.games);
  s.blob_games = j.value("blob_games", s.blob_games);
  s.splits = StringList(j, "splits", s.splits);
  if (s.n < 2) throw ConfigError("eval.n must be at least 2");
  if (s.games == 0 || s.blob_games == 0) throw ConfigError("eval game counts must be positive");
  for (const auto& split : s.splits) ParseSplit(split);
  return s;
}

nlohmann::json AnalysisSettings::ToJson() const {
  nlohmann::json j = config.ToJson();
  j["splits"] = splits;
  j["baselines"] = baselines;
  return j;
}

AnalysisSettings AnalysisSettings::FromJson(const nlohmann::json& j) {
  RejectUnknownKeys(j, {"permutations", "alpha", "pair_cap", "seed", "splits", "baselines"},
                    "analysis");
  AnalysisSettings s;
  s.config = AnalysisConfig::FromJson(j);
  s.splits = StringList(j, "splits", s.splits);
  s.baselines = StringList(j, "baselines", s.baselines);
  for (const auto& split : s.splits) ParseSplit(split);
  for (const auto& b : s.baselines) {
    if (b != "simclr-disc" && b != "simclr-kmeans") {
      throw ConfigError("unknown analysis baseline '" + b + "'");
    }
  }
  return s;
}

nlohmann::json ProbeSettings::ToJson() const {
  nlohmann::json j = config.ToJson();
  j["transfer"] = transfer;
  j["transfer_hue_shift"] = transfer_hue_shift;
  j["transfer_background_shift"] = transfer_background_shift;
  return j;
}

ProbeSettings ProbeSettings::FromJson(const nlohmann::json& j) {
  RejectUnknownKeys(j,
                    {"epochs", "learning_rate", "weight_decay", "batch_size", "momentum",
                     "standardize", "seed", "transfer", "transfer_hue_shift",
                     "transfer_background_shift"},
                    "probe");
  ProbeSettings s;
  s.config = ProbeConfig::FromJson(j);
  s.transfer = j.value("transfer", s.transfer);
  s.transfer_hue_shift = j.value("transfer_hue_shift", s.transfer_hue_shift);
  s.transfer_background_shift = j.value("transfer_background_shift", s.transfer_background_shift);
  return s;
}

nlohmann::json SeedSettings::ToJson() const {
  return {{"seeds", seeds}, {"variant", variant.Name()}, {"epochs", epochs}};
}

SeedSettings SeedSettings::FromJson(const nlohmann::json& j) {
  RejectUnknownKeys(j, {"seeds", "variant", "epochs"}, "seeds");
  SeedSettings s;
  if (j.contains("seeds")) s.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (j.contains("variant")) s.variant = Variant::FromJson(j.at("variant"));
  s.epochs = j.value("epochs", s.epochs);
  if (s.seeds.size() < 2) throw ConfigError("seeds needs at least 2 seeds");
  if (s.epochs < 0) throw ConfigError("seeds.epochs must be non-negative");
  return s;
}

RunConfig::RunConfig() {
  Variant main;
  Variant degenerate;
  degenerate.augment = false;
  degenerate.shared = true;
  Variant simclr;
  simclr.model = ModelKind::kSimClr;
  simclr.shared = true;
  variants = {main, degenerate, simclr};
}

void RunConfig::Validate() const {
  if (run_id.empty() || run_id.find('/') != std::string::npos || run_id == "." ||
      run_id == "..") {
    throw ConfigError("run_id must be a non-empty single path component");
  }
  if (variants.empty()) throw ConfigError("variant matrix is empty");
  std::set<std::string> names;
  for (const auto& v : variants) {
    if (!names.insert(v.Name()).second) throw ConfigError("duplicate variant " + v.Name());
  }
  data.Validate();
  train.Validate();
  if (train.encoder.image_size != data.render.image_size) {
    throw ConfigError("encoder image_size differs from the rendered image size");
  }
}

nlohmann::json RunConfig::ToJson() const {
  nlohmann::json train_json = train.ToJson();
  train_json.erase("variant");
  train_json.erase("seed");
  nlohmann::json variant_names = nlohmann::json::array();
  for (const auto& v : variants) variant_names.push_back(v.Name());
  return {{"run_id", run_id},
          {"out_dir", out_dir},
          {"seed", seed},
          {"data", data.ToJson()},
          {"train", train_json},
          {"variants", variant_names},
          {"eval", eval.ToJson()},
          {"analysis", analysis.ToJson()},
          {"probe", probe.ToJson()},
          {"seeds", seeds.ToJson()}};
}

RunConfig RunConfig::FromJson(const nlohmann::json& j) {
  RejectUnknownKeys(j,
                    {"run_id", "out_dir", "seed", "data", "train", "variants", "eval",
                     "analysis", "probe", "seeds"},
                    "config");
  RunConfig c;
  try {
    c.run_id = j.value("run_id", c.run_id);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.seed = j.value("seed", c.seed);
    if (j.contains("data")) {
      c.data = DataConfig::FromJson(j.at("data"));
      RejectKeysNotIn(j.at("data"), c.data.ToJson(), "data");
    }
    if (j.contains("train")) {
      if (j.at("train").contains("variant") || j.at("train").contains("seed")) {
        throw ConfigError("train.variant / train.seed are set by 'variants' and 'seed'");
      }
      c.train = TrainConfig::FromJson(j.at("train"));
      RejectKeysNotIn(j.at("train"), c.train.ToJson(), "train");
    }
    if (j.contains("variants")) {
      c.variants.clear();
      for (const auto& v : j.at("variants")) c.variants.push_back(Variant::FromJson(v));
    }
    if (j.contains("eval")) c.eval = EvalSettings::FromJson(j.at("eval"));
    if (j.contains("analysis")) c.analysis = AnalysisSettings::FromJson(j.at("analysis"));
    if (j.contains("probe")) c.probe = ProbeSettings::FromJson(j.at("probe"));
    if (j.contains("seeds")) c.seeds = SeedSettings::FromJson(j.at("seeds"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  c.Validate();
  return c;
}

fs::path RunConfig::RunDir() const { return fs::path(out_dir) / run_id; }

fs::path RunConfig::CheckpointPath(const Variant& variant) const {
  return RunDir() / "checkpoints" / (variant.Name() + ".ckpt");
}

TrainConfig RunConfig::TrainFor(const Variant& variant) const {
  TrainConfig c = train;
  c.variant = variant;
  c.seed = seed;
  return c;
}

RunConfig LoadRunConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  return RunConfig::FromJson(j);
}

void ApplyOverrides(RunConfig& config, const Overrides& overrides) {
  if (overrides.seed) config.seed = *overrides.seed;
  if (overrides.variant) config.variants = {Variant::Parse(*overrides.variant)};
  if (overrides.out_dir) config.out_dir = *overrides.out_dir;
  if (overrides.run_id) config.run_id = *overrides.run_id;
  config.Validate();
}

void WriteJson(const fs::path& path, const nlohmann::json& payload) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << payload.dump(2) << "\n";
}

nlohmann::json ReadJson(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

namespace {

ShapeWorld World(const RunConfig& config) { return MakeShapeWorld(config.data); }

const Dataset& SplitByName(const ShapeWorld& world, const std::string& name) {
  return world.split(ParseSplit(name));
}

TrainedModel LoadVariant(const RunConfig& config, const Variant& variant) {
  const fs::path path = config.CheckpointPath(variant);
  if (!fs::exists(path)) {
    throw InputError("no checkpoint for variant " + variant.Name() + " at " + path.string() +
                     " (run 'train' first)");
  }
  return LoadModel(path.string());
}

void WriteManifest(const RunConfig& config, const ShapeWorld& world) {
  WriteJson(config.RunDir() / "manifest.json", world.manifest.ToJson());
}

}  // namespace

nlohmann::json CmdGenData(const RunConfig& config, bool materialize) {
  ShapeWorld world = World(config);
  WriteManifest(config, world);
  if (materialize) {
    fs::create_directories(config.RunDir() / "data");
    for (Split s : {Split::kTrain, Split::kVal, Split::kOod, Split::kBlob}) {
      WriteCheckpoint((config.RunDir() / "data" / (std::string(SplitName(s)) + ".bin")).string(),
                      DatasetTensors(world.split(s)));
    }
  }
  return world.manifest.ToJson();
}

nlohmann::json CmdTrain(const RunConfig& config) {
  ShapeWorld world = World(config);
  WriteManifest(config, world);
  fs::create_directories(config.RunDir() / "checkpoints");
  std::ofstream metrics(config.RunDir() / "metrics.jsonl", std::ios::binary);
  std::ofstream timing(config.RunDir() / "metrics_timing.jsonl", std::ios::binary);
  nlohmann::json summary = {{"config", config.ToJson()}, {"variants", nlohmann::json::array()}};
  for (const Variant& variant : config.variants) {
    const std::string name = variant.Name();
    TrainResult result =
        Train(config.TrainFor(variant), world.train, [&](const EpochMetrics& m) {
          nlohmann::json line = m.ToJson();
          line["variant"] = name;
          metrics << line.dump() << "\n" << std::flush;
          timing << nlohmann::json{{"variant", name}, {"epoch", m.epoch}, {"seconds", m.seconds}}
                        .dump()
                 << "\n"
                 << std::flush;
        });
    const fs::path path = config.CheckpointPath(variant);
    SaveModel(path.string(), result.model);
    summary["variants"].push_back({{"variant", name},
                                   {"checkpoint", path.string()},
                                   {"digest", result.model.Digest()},
                                   {"final", result.metrics.back().ToJson()}});
  }
  return summary;
}

nlohmann::json CmdEval(const RunConfig& config) {
  ShapeWorld world = World(config);
  const EvalSettings& e = config.eval;
  const double chance = 1.0 / static_cast<double>(e.n);
  nlohmann::json results = nlohmann::json::object();
  for (const Variant& variant : config.variants) {
    TrainedModel model = LoadVariant(config, variant);
    nlohmann::json r = {{"chance", chance}};
    for (const std::string& split : e.splits) {
      const Dataset& data = SplitByName(world, split);
      const std::size_t games = data.split == Split::kBlob ? e.blob_games : e.games;
      Rng rng(DeriveSeed(config.seed, StreamOf("eval/" + variant.Name() + "/" + split)));
      r[split] = EvalGameAccuracy(model, data, e.n, games, rng);
    }
    results[variant.Name()] = r;
  }
  nlohmann::json doc = {{"config", config.ToJson()},
                        {"n", e.n},
                        {"chance", chance},
                        {"results", results}};
  WriteJson(config.RunDir() / "eval.json", doc);
  return doc;
}

namespace {

std::vector<ProtocolRecord> KMeansRecords(SimClr& model, const Dataset& data, std::size_t k,
                                          std::uint64_t seed) {
  Tensor h = ExtractFeatures(model.encoder(), data.samples);
  Rng rng(seed);
  KMeansResult km = KMeans(h, k, rng);
  return MakeRecords(data.samples, km.assignments);
}

nlohmann::json AnalyzeRecordsJson(const RunConfig& config,
                                  std::span<const ProtocolRecord> records,
                                  const Taxonomy* taxonomy) {
  return Analyze(records, taxonomy, config.analysis.config).ToJson();
}

}  // namespace

nlohmann::json CmdAnalyze(const RunConfig& config) {
  ShapeWorld world = World(config);
  nlohmann::json reports = nlohmann::json::object();
  const fs::path protocol_dir = config.RunDir() / "protocols";
  fs::create_directories(protocol_dir);
  for (const Variant& variant : config.variants) {
    TrainedModel model = LoadVariant(config, variant);
    for (const std::string& split : config.analysis.splits) {
      const Dataset& data = SplitByName(world, split);
      if (model.agents) {
        auto records = CollectProtocol(model.agents->sender(), data);
        WriteProtocolCsv((protocol_dir / (variant.Name() + "-" + split + ".csv")).string(),
                         records);
        reports[variant.Name()][split] = AnalyzeRecordsJson(config, records, &world.taxonomy);
        continue;
      }
      for (const std::string& baseline : config.analysis.baselines) {
        std::vector<ProtocolRecord> records =
            baseline == "simclr-disc"
                ? SimClrDiscSymbols(*model.simclr, data)
                : KMeansRecords(*model.simclr, data, model.config.channel.vocab_size,
                                DeriveSeed(config.seed, StreamOf("kmeans/" + split)));
        WriteProtocolCsv((protocol_dir / (baseline + "-" + split + ".csv")).string(), records);
        reports[baseline][split] = AnalyzeRecordsJson(config, records, &world.taxonomy);
      }
    }
  }
  nlohmann::json doc = {{"config", config.ToJson()}, {"reports", reports}};
  WriteJson(config.RunDir() / "analysis.json", doc);
  return doc;
}

nlohmann::json CmdAnalyzeRecords(const RunConfig& config, const std::string& csv_path) {
  std::vector<ProtocolRecord> records = ReadProtocolCsv(csv_path);
  if (records.empty()) throw InputError(csv_path + " holds no records");
  Taxonomy taxonomy = BuildTaxonomy(config.data.taxonomy);
  const bool leaves = std::all_of(records.begin(), records.end(), [&](const ProtocolRecord& r) {
    return r.category >= 0 && static_cast<std::size_t>(r.category) < taxonomy.nodes().size() &&
           taxonomy.IsLeaf(r.category);
  });
  nlohmann::json report = AnalyzeRecordsJson(config, records, leaves ? &taxonomy : nullptr);
  if (!leaves) report["wnsim_note"] = "categories are not taxonomy leaves; WNsim not computed";
  nlohmann::json doc = {{"config", config.ToJson()},
                        {"source", csv_path},
                        {"reports", {{"records", {{"csv", report}}}}}};
  WriteJson(config.RunDir() / "analysis.json", doc);
  return doc;
}

nlohmann::json CmdAnalyzeFeatures(const RunConfig& config, const std::string& path,
                                  std::size_t k) {
  std::map<std::string, Tensor> tensors;
  for (auto& t : ReadCheckpoint(path)) tensors[t.name] = t.value;
  if (!tensors.count("features") || !tensors.count("labels")) {
    throw InputError(path + " must hold 'features' and 'labels' tensors");
  }
  const Tensor& features = tensors["features"];
  const Tensor& labels = tensors["labels"];
  if (features.rank() != 2 || labels.size() != features.dim(0)) {
    throw InputError(path + ": features must be [N x D] with N labels");
  }
  Rng rng(DeriveSeed(config.seed, StreamOf("kmeans/features")));
  KMeansResult km = KMeans(features, k, rng);
  std::vector<ProtocolRecord> records(km.assignments.size());
  for (std::size_t i = 0; i < records.size(); ++i)
    records[i] = {i, static_cast<int>(labels[i]), km.assignments[i]};
  Taxonomy taxonomy = BuildTaxonomy(config.data.taxonomy);
  const bool leaves = std::all_of(records.begin(), records.end(), [&](const ProtocolRecord& r) {
    return r.category >= 0 && static_cast<std::size_t>(r.category) < taxonomy.nodes().size() &&
           taxonomy.IsLeaf(r.category);
  });
  nlohmann::json report = AnalyzeRecordsJson(config, records, leaves ? &taxonomy : nullptr);
  report["k"] = k;
  report["kmeans_iterations"] = km.iterations;
  nlohmann::json doc = {{"config", config.ToJson()},
                        {"source", path},
                        {"reports", {{"simclr-kmeans", {{"features", report}}}}}};
  WriteJson(config.RunDir() / "analysis.json", doc);
  return doc;
}

namespace {

nlohmann::json ProbePair(Encoder& trained, Encoder& random, const Dataset& train,
                         const Dataset& test, const ProbeConfig& cfg) {
  auto run = [&](Encoder& encoder) {
    Tensor f_train = ExtractFeatures(encoder, train.samples);
    Tensor f_test = ExtractFeatures(encoder, test.samples);
    const std::vector<int> y_train = train.Labels(), y_test = test.Labels();
    LinearProbe probe = TrainLinearProbe(f_train, y_train, cfg);
    return EvaluateProbe(probe, f_test, y_test);
  };
  ProbeResult a = run(trained), b = run(random);
  return {{"trained", a.ToJson()}, {"random_init", b.ToJson()}, {"gain", a.top1 - b.top1}};
}

}  // namespace

nlohmann::json CmdProbe(const RunConfig& config) {
  ShapeWorld world = World(config);
  std::optional<ShapeWorld> shifted;
  if (config.probe.transfer) {
    DataConfig d = config.data;
    d.render.hue_shift += config.probe.transfer_hue_shift;
    d.render.background_shift += config.probe.transfer_background_shift;
    d.seed = DeriveSeed(config.data.seed, StreamOf("transfer-world"));
    shifted = MakeShapeWorld(d);
  }
  nlohmann::json results = nlohmann::json::object();
  for (const Variant& variant : config.variants) {
    TrainedModel model = LoadVariant(config, variant);
    TrainedModel random = InitModel(model.config);
    const std::string before = model.Digest();
    nlohmann::json r;
    r["in_distribution"] = ProbePair(model.SenderEncoder(), random.SenderEncoder(), world.train,
                                     world.val, config.probe.config);
    if (shifted) {
      r["transfer"] = ProbePair(model.SenderEncoder(), random.SenderEncoder(), shifted->train,
                                shifted->val, config.probe.config);
    }
    if (model.agents) {
      Tensor s = ExtractFeatures(model.agents->sender().encoder(), world.val.samples);
      Tensor q = ExtractFeatures(model.agents->receiver().encoder(), world.val.samples);
      r["sender_receiver_similarity_correlation"] = SimilarityStructureCorrelation(s, q);
    }
    r["checkpoint_unchanged"] = model.Digest() == before;
    results[variant.Name()] = r;
  }
  nlohmann::json doc = {{"config", config.ToJson()}, {"results", results}};
  WriteJson(config.RunDir() / "probe.json", doc);
  return doc;
}

nlohmann::json SeedSummaryRow::ToJson() const {
  return {{"metric", metric}, {"avg", avg}, {"sd", sd}, {"min", min}, {"max", max},
          {"values", values}};
}

SeedSummaryRow Summarize(const std::string& metric, std::span<const double> values) {
  if (values.empty()) throw InputError("no values for metric " + metric);
  SeedSummaryRow row;
  row.metric = metric;
  row.values.assign(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  row.avg = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - row.avg) * (v - row.avg);
  row.sd = std::sqrt(sq / static_cast<double>(values.size()));
  row.min = *std::min_element(values.begin(), values.end());
  row.max = *std::max_element(values.begin(), values.end());
  // Guard against rounding pushing the mean outside its range.
  row.avg = std::clamp(row.avg, row.min, row.max);
  return row;
}

std::string FormatSeedTable(std::span<const SeedSummaryRow> rows) {
  std::ostringstream out;
  out << std::left << std::setw(28) << "metric" << std::right << std::setw(10) << "avg"
      << std::setw(10) << "sd" << std::setw(10) << "min" << std::setw(10) << "max" << "\n";
  out << std::fixed << std::setprecision(4);
  for (const auto& r : rows) {
    out << std::left << std::setw(28) << r.metric << std::right << std::setw(10) << r.avg
        << std::setw(10) << r.sd << std::setw(10) << r.min << std::setw(10) << r.max << "\n";
  }
  return out.str();
}

RunConfig SeedRunConfig(const RunConfig& config, std::uint64_t seed) {
  RunConfig sub = config;
  sub.out_dir = (config.RunDir() / "seeds").string();
  sub.run_id = "seed-" + std::to_string(seed);
  sub.seed = seed;
  sub.variants = {config.seeds.variant};
  if (config.seeds.epochs > 0) sub.train.epochs = config.seeds.epochs;
  sub.analysis.baselines.clear();
  return sub;
}

nlohmann::json CmdSeeds(const RunConfig& config) {
  std::map<std::string, std::vector<double>> values;
  std::vector<std::string> order;
  auto add = [&](const std::string& metric, double v) {
    if (!values.count(metric)) order.push_back(metric);
    values[metric].push_back(v);
  };
  nlohmann::json failures = nlohmann::json::array();
  nlohmann::json per_seed = nlohmann::json::array();
  std::vector<std::uint64_t> completed;
  for (std::uint64_t seed : config.seeds.seeds) {
    const RunConfig sub = SeedRunConfig(config, seed);
    try {
      const std::string name = config.seeds.variant.Name();
      nlohmann::json train = CmdTrain(sub);
      nlohmann::json eval = CmdEval(sub);
      nlohmann::json analysis = CmdAnalyze(sub);
      nlohmann::json probe = CmdProbe(sub);
      std::vector<std::pair<std::string, double>> row;
      row.emplace_back("final_train_loss", train["variants"][0]["final"]["loss"]);
      for (const auto& split : sub.eval.splits)
        row.emplace_back("game_acc_" + split, eval["results"][name][split]);
      for (const auto& split : sub.analysis.splits) {
        const nlohmann::json& a = analysis["reports"][name][split];
        row.emplace_back("protocol_size_" + split, a["protocol_size"]);
        row.emplace_back("nmi_" + split, a["nmi"]);
        if (!a["wnsim"].is_null()) row.emplace_back("wnsim_" + split, a["wnsim"]);
      }
      const auto& pr = probe["results"][name];
      row.emplace_back("probe_top1", pr["in_distribution"]["trained"]["top1"]);
      if (pr.contains("transfer"))
        row.emplace_back("probe_transfer_top1", pr["transfer"]["trained"]["top1"]);
      nlohmann::json seed_json = {{"seed", seed}};
      for (const auto& [metric, v] : row) {
        add(metric, v);
        seed_json[metric] = v;
      }
      per_seed.push_back(seed_json);
      completed.push_back(seed);
    } catch (const std::exception& e) {
      failures.push_back({{"seed", seed}, {"error", e.what()}});
    }
  }
  std::vector<SeedSummaryRow> rows;
  for (const auto& metric : order) rows.push_back(Summarize(metric, values[metric]));
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows) rows_json.push_back(r.ToJson());
  nlohmann::json doc = {{"config", config.ToJson()},
                        {"seeds", config.seeds.seeds},
                        {"completed", completed},
                        {"failures", failures},
                        {"per_seed", per_seed},
                        {"rows", rows_json},
                        {"table", FormatSeedTable(rows)}};
  WriteJson(config.RunDir() / "seeds.json", doc);
  if (!failures.empty()) {
    throw PartialFailure(std::to_string(failures.size()) + " of " +
                         std::to_string(config.seeds.seeds.size()) + " seed runs failed");
  }
  return doc;
}

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string Fmt(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << v;
  return s.str();
}

struct Series {
  std::string name;
  std::vector<double> values;
};

std::string LineChart(const std::string& title, const std::vector<Series>& series,
                      double y_max) {
  const double w = 640, h = 360, left = 60, right = 160, top = 40, bottom = 40;
  std::size_t longest = 1;
  for (const auto& s : series) longest = std::max(longest, s.values.size());
  auto px = [&](std::size_t i) {
    return left + (w - left - right) * (longest > 1 ? double(i) / double(longest - 1) : 0.0);
  };
  auto py = [&](double v) { return h - bottom - (h - top - bottom) * (v / y_max); };
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << left << "\" y=\"24\" font-size=\"14\">" << title << "</text>\n"
      << "<line x1=\"" << left << "\" y1=\"" << py(0) << "\" x2=\"" << w - right << "\" y2=\""
      << py(0) << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << left << "\" y1=\"" << py(0) << "\" x2=\"" << left << "\" y2=\""
      << py(y_max) << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = y_max * t / 4.0;
    svg << "<text x=\"" << left - 6 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">"
        << Fmt(v) << "</text>\n";
  }
  svg << "<text x=\"" << (left + w - right) / 2 << "\" y=\"" << h - 8
      << "\" text-anchor=\"middle\">epoch</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = kPalette[k % 6];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < series[k].values.size(); ++i)
      svg << Fmt(px(i)) << "," << Fmt(py(series[k].values[i])) << " ";
    svg << "\"/>\n<text x=\"" << w - right + 10 << "\" y=\"" << top + 16 * (k + 1)
        << "\" fill=\"" << color << "\">" << series[k].name << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string BarChart(const std::string& title,
                     const std::vector<std::pair<std::string, double>>& bars, double y_max,
                     std::optional<double> reference) {
  const double w = 640, h = 360, left = 60, top = 40, bottom = 80;
  const double slot = (w - left - 20) / std::max<std::size_t>(1, bars.size());
  auto py = [&](double v) { return h - bottom - (h - top - bottom) * (v / y_max); };
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << left << "\" y=\"24\" font-size=\"14\">" << title << "</text>\n";
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const double x = left + slot * i + slot * 0.15, bw = slot * 0.7;
    const double v = std::clamp(bars[i].second, 0.0, y_max);
    svg << "<rect x=\"" << Fmt(x) << "\" y=\"" << Fmt(py(v)) << "\" width=\"" << Fmt(bw)
        << "\" height=\"" << Fmt(py(0) - py(v)) << "\" fill=\"" << kPalette[i % 6] << "\"/>\n"
        << "<text x=\"" << Fmt(x + bw / 2) << "\" y=\"" << Fmt(py(v) - 4)
        << "\" text-anchor=\"middle\">" << Fmt(bars[i].second) << "</text>\n"
        << "<text x=\"" << Fmt(x + bw / 2) << "\" y=\"" << Fmt(py(0) + 14)
        << "\" text-anchor=\"middle\">" << bars[i].first << "</text>\n";
  }
  if (reference) {
    svg << "<line x1=\"" << left << "\" y1=\"" << Fmt(py(*reference)) << "\" x2=\"" << w - 20
        << "\" y2=\"" << Fmt(py(*reference)) << "\" stroke=\"gray\" stroke-dasharray=\"4\"/>\n";
  }
  svg << "<line x1=\"" << left << "\" y1=\"" << py(0) << "\" x2=\"" << w - 20 << "\" y2=\""
      << py(0) << "\" stroke=\"black\"/>\n</svg>\n";
  return svg.str();
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

}  // namespace

nlohmann::json CmdReport(const RunConfig& config) {
  const fs::path dir = config.RunDir();
  const fs::path plots = dir / "plots";
  fs::create_directories(plots);
  nlohmann::json written = nlohmann::json::array();

  if (fs::exists(dir / "metrics.jsonl")) {
    std::map<std::string, Series> loss, acc;
    std::vector<std::string> names;
    std::ifstream in(dir / "metrics.jsonl");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      nlohmann::json m = nlohmann::json::parse(line);
      const std::string name = m.at("variant");
      if (!loss.count(name)) {
        names.push_back(name);
        loss[name].name = acc[name].name = name;
      }
      loss[name].values.push_back(m.at("loss"));
      acc[name].values.push_back(m.at("acc"));
    }
    std::vector<Series> ls, as;
    double max_loss = 0.0;
    for (const auto& n : names) {
      ls.push_back(loss[n]);
      as.push_back(acc[n]);
      for (double v : loss[n].values) max_loss = std::max(max_loss, v);
    }
    WriteText(plots / "train_loss.svg", LineChart("training loss", ls, std::max(1e-9, max_loss)));
    WriteText(plots / "train_accuracy.svg", LineChart("train-batch accuracy", as, 1.0));
    written.push_back((plots / "train_loss.svg").string());
    written.push_back((plots / "train_accuracy.svg").string());
  }
  if (fs::exists(dir / "eval.json")) {
    nlohmann::json eval = ReadJson(dir / "eval.json");
    std::vector<std::pair<std::string, double>> bars;
    for (const auto& [variant, r] : eval.at("results").items())
      for (const auto& [split, v] : r.items())
        if (split != "chance") bars.emplace_back(variant + " " + split, v.get<double>());
    WriteText(plots / "game_accuracy.svg",
              BarChart("game accuracy (dashed: chance)", bars, 1.0, eval.at("chance").get<double>()));
    written.push_back((plots / "game_accuracy.svg").string());
  }
  if (fs::exists(dir / "analysis.json")) {
    nlohmann::json analysis = ReadJson(dir / "analysis.json");
    std::vector<std::pair<std::string, double>> bars;
    for (const auto& [model, splits] : analysis.at("reports").items())
      for (const auto& [split, rep] : splits.items())
        bars.emplace_back(model + " " + split, rep.at("nmi").get<double>());
    WriteText(plots / "nmi.svg", BarChart("normalized mutual information", bars, 1.0, std::nullopt));
    written.push_back((plots / "nmi.svg").string());
  }
  if (written.empty()) throw InputError("nothing to plot in " + dir.string());
  return {{"plots", written}};
}

}  // namespace refgame
