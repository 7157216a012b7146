/**
 * supcon-lab
 *
 * This code is released under the
 * Apache License Version 2.0 http://www.apache.org/licenses/.
 */
#include "supcon/experiment.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace supcon {

namespace {

void check_keys(const nlohmann::json& j, const std::string& ctx,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) {
    throw std::invalid_argument("config: " + ctx + " must be an object");
  }
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw std::invalid_argument("config: unknown key '" + item.key() +
                                  "' in " + ctx);
    }
  }
}

template <typename T>
void maybe_get(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::string format_double(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

Vec vec_from_json_array(const nlohmann::json& j) {
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = j.at(i).get<double>();
  }
  return v;
}

nlohmann::json vec_to_json_array(const Vec& v) {
  return std::vector<double>(v.begin(), v.end());
}

std::vector<Subcluster> subclusters_from_json(const nlohmann::json& j,
                                              const std::string& ctx) {
  std::vector<Subcluster> out;
  for (const auto& e : j) {
    check_keys(e, ctx, {"direction", "concentration"});
    Subcluster sc;
    sc.direction = vec_from_json_array(e.at("direction"));
    sc.concentration = e.at("concentration").get<double>();
    out.push_back(std::move(sc));
  }
  return out;
}

nlohmann::json subclusters_to_json(const std::vector<Subcluster>& subs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Subcluster& sc : subs) {
    arr.push_back({{"direction", vec_to_json_array(sc.direction)},
                   {"concentration", sc.concentration}});
  }
  return arr;
}

SyntheticSpec synthetic_from_json(const nlohmann::json& j) {
  check_keys(j, "data.synthetic",
             {"frame_dim", "frames", "n_train", "n_dev", "n_eval",
              "n_ood_splits", "balance", "frame_noise_sigma", "ood_noise_scale",
              "bona_center", "spoof_subclusters", "ood_subclusters", "seed"});
  SyntheticSpec spec;
  maybe_get(j, "frame_dim", spec.frame_dim);
  maybe_get(j, "frames", spec.frames);
  maybe_get(j, "n_train", spec.n_train);
  maybe_get(j, "n_dev", spec.n_dev);
  maybe_get(j, "n_eval", spec.n_eval);
  maybe_get(j, "n_ood_splits", spec.n_ood_splits);
  maybe_get(j, "balance", spec.balance);
  maybe_get(j, "frame_noise_sigma", spec.frame_noise_sigma);
  maybe_get(j, "ood_noise_scale", spec.ood_noise_scale);
  maybe_get(j, "seed", spec.seed);
  if (j.contains("bona_center")) {
    spec.bona_center = vec_from_json_array(j.at("bona_center"));
  }
  if (j.contains("spoof_subclusters")) {
    spec.spoof_subclusters =
        subclusters_from_json(j.at("spoof_subclusters"), "spoof_subclusters");
  }
  if (j.contains("ood_subclusters")) {
    spec.ood_subclusters =
        subclusters_from_json(j.at("ood_subclusters"), "ood_subclusters");
  }
  return spec;
}

nlohmann::json synthetic_to_json(const SyntheticSpec& spec) {
  nlohmann::json j;
  j["frame_dim"] = spec.frame_dim;
  j["frames"] = spec.frames;
  j["n_train"] = spec.n_train;
  j["n_dev"] = spec.n_dev;
  j["n_eval"] = spec.n_eval;
  j["n_ood_splits"] = spec.n_ood_splits;
  j["balance"] = spec.balance;
  j["frame_noise_sigma"] = spec.frame_noise_sigma;
  j["ood_noise_scale"] = spec.ood_noise_scale;
  j["seed"] = spec.seed;
  if (spec.bona_center.size() > 0) {
    j["bona_center"] = vec_to_json_array(spec.bona_center);
  }
  if (!spec.spoof_subclusters.empty()) {
    j["spoof_subclusters"] = subclusters_to_json(spec.spoof_subclusters);
  }
  if (!spec.ood_subclusters.empty()) {
    j["ood_subclusters"] = subclusters_to_json(spec.ood_subclusters);
  }
  return j;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (similarity != "cosine" && similarity != "geodesic" &&
      similarity != "none") {
    throw std::invalid_argument("config: similarity must be cosine, geodesic, or none");
  }
  if (!is_baseline()) {
    LossConfig lc{temperature, similarity_from_string(similarity)};
    lc.validate();
  }
  queue.validate();
  train.validate();
  optim.validate();
  model.validate();
  if (stage != "1" && stage != "2" && stage != "both") {
    throw std::invalid_argument("config: stage must be '1', '2', or 'both'");
  }
  if (is_baseline() && stage != "both") {
    throw std::invalid_argument("config: the BCE baseline is single-stage; use stage 'both'");
  }
  switch (data.kind) {
    case DataConfig::Kind::Synthetic:
      if (data.synthetic.frame_dim != model.frame_dim) {
        throw std::invalid_argument(
            "config: synthetic frame_dim must match model frame_dim");
      }
      break;
    case DataConfig::Kind::Manifest:
      if (data.manifest_path.empty()) {
        throw std::invalid_argument("config: data.manifest path is empty");
      }
      break;
    case DataConfig::Kind::Embeddings: {
      if (stage != "2") {
        throw std::invalid_argument(
            "config: embedding-file data supports only stage '2'");
      }
      if (!data.embedding_paths.contains("train") ||
          !data.embedding_paths.contains("dev")) {
        throw std::invalid_argument(
            "config: embedding data needs 'train' and 'dev' entries");
      }
      bool has_eval = false;
      for (const auto& [split, path] : data.embedding_paths) {
        if (split.starts_with("eval")) has_eval = true;
      }
      if (!has_eval) {
        throw std::invalid_argument(
            "config: embedding data needs at least one eval split");
      }
      break;
    }
  }
  if (stage == "2" && data.kind != DataConfig::Kind::Embeddings &&
      init_checkpoint.empty()) {
    throw std::invalid_argument(
        "config: stage '2' needs init_checkpoint with stage-1 parameters");
  }
}

std::string ExperimentConfig::run_id() const {
  std::string id = name;
  if (is_baseline()) {
    id += "_bce";
  } else {
    id += "_" + similarity + "_tau" + format_double("%g", temperature);
  }
  id += "_q" + std::to_string(queue.capacity) + "_s" + std::to_string(seed);
  return id;
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  j["similarity"] = similarity;
  if (!is_baseline()) j["temperature"] = temperature;
  j["queue"] = {{"capacity", queue.capacity}, {"start_epoch", queue.start_epoch}};
  j["batch_size"] = train.batch_size;
  j["max_epochs"] = train.max_epochs;
  j["target_frames"] = train.target_frames;
  j["augment"] = {{"prob", train.augment.prob}, {"sigma", train.augment.sigma}};
  j["optim"] = {{"encoder_lr", optim.encoder_lr},
                {"projection_lr", optim.projection_lr},
                {"classifier_lr", optim.classifier_lr},
                {"weight_decay", optim.weight_decay},
                {"beta1", optim.beta1},
                {"beta2", optim.beta2},
                {"eps", optim.eps},
                {"patience", optim.patience}};
  j["model"] = {{"frame_dim", model.frame_dim},
                {"hidden_dim", model.hidden_dim},
                {"feature_dim", model.feature_dim},
                {"embedding_dim", model.embedding_dim}};
  j["seed"] = seed;
  j["stage"] = stage;
  if (!init_checkpoint.empty()) j["init_checkpoint"] = init_checkpoint.string();
  switch (data.kind) {
    case DataConfig::Kind::Synthetic:
      j["data"]["synthetic"] = synthetic_to_json(data.synthetic);
      break;
    case DataConfig::Kind::Manifest:
      j["data"]["manifest"] = data.manifest_path.string();
      break;
    case DataConfig::Kind::Embeddings: {
      nlohmann::json paths;
      for (const auto& [split, path] : data.embedding_paths) {
        paths[split] = path.string();
      }
      j["data"]["embeddings"] = std::move(paths);
      break;
    }
  }
  return j;
}

std::string ExperimentConfig::config_hash() const {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(to_json().dump())));
  return buf;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  check_keys(j, "experiment config",
             {"name", "similarity", "temperature", "queue", "batch_size",
              "max_epochs", "target_frames", "augment", "optim", "model",
              "seed", "stage", "init_checkpoint", "data"});
  ExperimentConfig cfg;
  maybe_get(j, "name", cfg.name);
  maybe_get(j, "similarity", cfg.similarity);
  maybe_get(j, "temperature", cfg.temperature);
  if (j.contains("queue")) {
    const nlohmann::json& q = j.at("queue");
    check_keys(q, "queue", {"capacity", "start_epoch"});
    maybe_get(q, "capacity", cfg.queue.capacity);
    maybe_get(q, "start_epoch", cfg.queue.start_epoch);
  }
  maybe_get(j, "batch_size", cfg.train.batch_size);
  maybe_get(j, "max_epochs", cfg.train.max_epochs);
  maybe_get(j, "target_frames", cfg.train.target_frames);
  if (j.contains("augment")) {
    const nlohmann::json& a = j.at("augment");
    check_keys(a, "augment", {"prob", "sigma"});
    maybe_get(a, "prob", cfg.train.augment.prob);
    maybe_get(a, "sigma", cfg.train.augment.sigma);
  }
  if (j.contains("optim")) {
    const nlohmann::json& o = j.at("optim");
    check_keys(o, "optim",
               {"encoder_lr", "projection_lr", "classifier_lr", "weight_decay",
                "beta1", "beta2", "eps", "patience"});
    maybe_get(o, "encoder_lr", cfg.optim.encoder_lr);
    maybe_get(o, "projection_lr", cfg.optim.projection_lr);
    maybe_get(o, "classifier_lr", cfg.optim.classifier_lr);
    maybe_get(o, "weight_decay", cfg.optim.weight_decay);
    maybe_get(o, "beta1", cfg.optim.beta1);
    maybe_get(o, "beta2", cfg.optim.beta2);
    maybe_get(o, "eps", cfg.optim.eps);
    maybe_get(o, "patience", cfg.optim.patience);
  }
  if (j.contains("model")) {
    const nlohmann::json& m = j.at("model");
    check_keys(m, "model",
               {"frame_dim", "hidden_dim", "feature_dim", "embedding_dim"});
    maybe_get(m, "frame_dim", cfg.model.frame_dim);
    maybe_get(m, "hidden_dim", cfg.model.hidden_dim);
    maybe_get(m, "feature_dim", cfg.model.feature_dim);
    maybe_get(m, "embedding_dim", cfg.model.embedding_dim);
  }
  maybe_get(j, "seed", cfg.seed);
  maybe_get(j, "stage", cfg.stage);
  if (j.contains("init_checkpoint")) {
    cfg.init_checkpoint = j.at("init_checkpoint").get<std::string>();
  }
  if (j.contains("data")) {
    const nlohmann::json& d = j.at("data");
    check_keys(d, "data", {"synthetic", "manifest", "embeddings"});
    if (d.size() != 1) {
      throw std::invalid_argument(
          "config: data must hold exactly one of synthetic/manifest/embeddings");
    }
    if (d.contains("synthetic")) {
      cfg.data.kind = DataConfig::Kind::Synthetic;
      cfg.data.synthetic = synthetic_from_json(d.at("synthetic"));
    } else if (d.contains("manifest")) {
      cfg.data.kind = DataConfig::Kind::Manifest;
      cfg.data.manifest_path = d.at("manifest").get<std::string>();
    } else {
      cfg.data.kind = DataConfig::Kind::Embeddings;
      for (const auto& item : d.at("embeddings").items()) {
        cfg.data.embedding_paths[item.key()] =
            std::filesystem::path(item.value().get<std::string>());
      }
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open config: " + path.string());
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("bad config " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

SweepSpec SweepSpec::from_json(const nlohmann::json& j) {
  check_keys(j, "sweep spec",
             {"base", "similarities", "temperatures", "queue_capacities",
              "tau_per_similarity"});
  SweepSpec sweep;
  if (!j.contains("base")) {
    throw std::invalid_argument("sweep spec: missing base experiment config");
  }
  sweep.base = ExperimentConfig::from_json(j.at("base"));
  if (j.contains("similarities")) {
    sweep.similarities = j.at("similarities").get<std::vector<std::string>>();
  }
  if (j.contains("temperatures")) {
    sweep.temperatures = j.at("temperatures").get<std::vector<double>>();
  }
  if (j.contains("queue_capacities")) {
    sweep.queue_capacities =
        j.at("queue_capacities").get<std::vector<std::size_t>>();
  }
  if (j.contains("tau_per_similarity")) {
    sweep.tau_per_similarity.clear();
    for (const auto& item : j.at("tau_per_similarity").items()) {
      sweep.tau_per_similarity[item.key()] = item.value().get<double>();
    }
  }
  return sweep;
}

SweepSpec SweepSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open sweep spec: " + path.string());
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("bad sweep spec " + path.string() + ": " +
                                e.what());
  }
  return from_json(j);
}

std::vector<ExperimentConfig> SweepSpec::expand() const {
  if (similarities.empty()) {
    throw std::invalid_argument("sweep spec: similarities must be non-empty");
  }
  for (const std::string& s : similarities) {
    if (s != "cosine" && s != "geodesic") {
      throw std::invalid_argument("sweep spec: similarity '" + s +
                                  "' is not sweepable");
    }
  }
  if (temperatures.empty() && queue_capacities.empty()) {
    throw std::invalid_argument(
        "sweep spec: need a non-empty temperatures and/or queue_capacities axis");
  }
  std::vector<ExperimentConfig> grid;
  for (const std::string& sim : similarities) {
    std::vector<double> taus = temperatures;
    if (taus.empty()) {
      // Capacity-only sweep: temperature pinned per similarity.
      const auto it = tau_per_similarity.find(sim);
      if (it == tau_per_similarity.end()) {
        throw std::invalid_argument(
            "sweep spec: no tau_per_similarity entry for '" + sim + "'");
      }
      taus.push_back(it->second);
    }
    std::vector<std::size_t> caps = queue_capacities;
    if (caps.empty()) caps.push_back(base.queue.capacity);
    for (double tau : taus) {
      for (std::size_t cap : caps) {
        ExperimentConfig cfg = base;
        cfg.similarity = sim;
        cfg.temperature = tau;
        cfg.queue.capacity = cap;
        cfg.validate();
        grid.push_back(std::move(cfg));
      }
    }
  }
  return grid;
}

DataBundle load_data_bundle(const DataConfig& data) {
  switch (data.kind) {
    case DataConfig::Kind::Synthetic:
      return generate(data.synthetic);
    case DataConfig::Kind::Manifest:
      return read_manifest(data.manifest_path);
    case DataConfig::Kind::Embeddings:
      break;
  }
  throw std::invalid_argument("embedding-file data has no utterance bundle");
}

std::vector<std::pair<std::string, ScoreSet>> score_eval_splits(
    const ModelParams& params, const std::string& checkpoint_stage,
    const DataBundle& bundle, SimilarityKind probe_kind, int target_frames) {
  std::vector<std::pair<std::string, ScoreSet>> out;
  for (const Dataset& split : bundle.evals) {
    if (checkpoint_stage == "stage1") {
      out.emplace_back(split.name, probe_scores(params, bundle.train, split,
                                                probe_kind, target_frames));
    } else {
      out.emplace_back(split.name,
                       classifier_scores(
                           params, embed_dataset(params, split, target_frames)));
    }
  }
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

EmbeddingSet embedding_set_from_file(const std::filesystem::path& path) {
  EmbeddingSet set;
  for (EmbeddingRecord& rec : load_embeddings(path)) {
    set.ids.push_back(std::move(rec.id));
    set.labels.push_back(rec.label);
    set.embeddings.push_back(std::move(rec.vector));
  }
  return set;
}

struct RunArtifacts {
  ModelParams final_params;
  std::string stage_tag;
  nlohmann::json optim_state;
  std::vector<EpochRecord> log;
  int epochs_run = 0;
  std::vector<std::pair<std::string, ScoreSet>> split_scores;
};

RunArtifacts execute(const ExperimentConfig& cfg) {
  RunArtifacts art;

  if (cfg.data.kind == DataConfig::Kind::Embeddings) {
    const EmbeddingSet train_set =
        embedding_set_from_file(cfg.data.embedding_paths.at("train"));
    const EmbeddingSet dev_set =
        embedding_set_from_file(cfg.data.embedding_paths.at("dev"));
    if (!train_set.embeddings.empty() &&
        train_set.embeddings.front().size() != cfg.model.embedding_dim) {
      throw std::invalid_argument(
          "embedding files carry dim " +
          std::to_string(train_set.embeddings.front().size()) +
          " but model.embedding_dim is " +
          std::to_string(cfg.model.embedding_dim));
    }
    ModelParams frozen;
    if (!cfg.init_checkpoint.empty()) {
      frozen = load_checkpoint(cfg.init_checkpoint).params;
    } else {
      Rng init_rng(cfg.seed, "init");
      frozen = ModelParams::init(cfg.model, init_rng);
    }
    StageResult s2 = train_stage2(frozen, train_set, dev_set, cfg.train,
                                  cfg.optim, cfg.seed);
    art.final_params = s2.best_params;
    art.stage_tag = "stage2";
    art.optim_state = std::move(s2.best_optim_state);
    art.log = std::move(s2.log);
    art.epochs_run = s2.epochs_run;
    for (const auto& [split, path] : cfg.data.embedding_paths) {
      if (!split.starts_with("eval")) continue;
      art.split_scores.emplace_back(
          split, classifier_scores(art.final_params,
                                   embedding_set_from_file(path)));
    }
    return art;
  }

  const DataBundle bundle = load_data_bundle(cfg.data);
  Rng init_rng(cfg.seed, "init");
  const ModelParams initial = ModelParams::init(cfg.model, init_rng);

  if (cfg.is_baseline()) {
    StageResult sb = train_bce_end_to_end(initial, bundle.train, bundle.dev,
                                          cfg.train, cfg.optim, cfg.seed);
    art.final_params = sb.best_params;
    art.stage_tag = "baseline";
    art.optim_state = std::move(sb.best_optim_state);
    art.log = std::move(sb.log);
    art.epochs_run = sb.epochs_run;
  } else {
    const LossConfig loss_config{cfg.temperature,
                                 similarity_from_string(cfg.similarity)};
    ModelParams stage1_params;
    if (cfg.stage == "2") {
      const Checkpoint ckpt = load_checkpoint(cfg.init_checkpoint);
      if (!(ckpt.params.dims == cfg.model)) {
        throw std::invalid_argument(
            "init_checkpoint dims do not match the configured model");
      }
      stage1_params = ckpt.params;
    } else {
      StageResult s1 = train_stage1(initial, bundle.train, bundle.dev,
                                    loss_config, cfg.queue, cfg.train,
                                    cfg.optim, cfg.seed);
      stage1_params = s1.best_params;
      art.optim_state = std::move(s1.best_optim_state);
      art.log = std::move(s1.log);
      art.epochs_run = s1.epochs_run;
    }
    if (cfg.stage == "1") {
      art.final_params = stage1_params;
      art.stage_tag = "stage1";
    } else {
      const EmbeddingSet train_set =
          embed_dataset(stage1_params, bundle.train, cfg.train.target_frames);
      const EmbeddingSet dev_set =
          embed_dataset(stage1_params, bundle.dev, cfg.train.target_frames);
      StageResult s2 = train_stage2(stage1_params, train_set, dev_set,
                                    cfg.train, cfg.optim, cfg.seed);
      art.final_params = s2.best_params;
      art.stage_tag = "stage2";
      art.optim_state = std::move(s2.best_optim_state);
      for (EpochRecord& rec : s2.log) art.log.push_back(rec);
      art.epochs_run += s2.epochs_run;
    }
  }

  const SimilarityKind probe_kind =
      cfg.is_baseline() ? SimilarityKind::Cosine
                        : similarity_from_string(cfg.similarity);
  art.split_scores = score_eval_splits(art.final_params, art.stage_tag, bundle,
                                       probe_kind, cfg.train.target_frames);
  return art;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg,
                         const std::filesystem::path& out_dir) {
  cfg.validate();
  const std::filesystem::path run_dir = out_dir / cfg.run_id();
  std::filesystem::create_directories(run_dir / "scores");
  const auto t0 = Clock::now();
  try {
    RunArtifacts art = execute(cfg);

    Checkpoint ckpt;
    ckpt.stage = art.stage_tag;
    ckpt.config_hash = cfg.config_hash();
    ckpt.params = art.final_params;
    ckpt.optimizer = art.optim_state;
    save_checkpoint(ckpt, run_dir / "checkpoint.json");

    {
      std::ofstream log_out(run_dir / "log.jsonl");
      if (!log_out) {
        throw std::runtime_error("cannot write training log under " +
                                 run_dir.string());
      }
      for (const EpochRecord& rec : art.log) {
        log_out << epoch_record_to_json(rec).dump() << '\n';
      }
    }

    RunResult result;
    result.run_id = cfg.run_id();
    result.similarity = cfg.similarity;
    if (!cfg.is_baseline()) result.tau = cfg.temperature;
    result.queue_capacity = cfg.queue.capacity;
    result.e_start = cfg.queue.start_epoch;
    result.seed = cfg.seed;
    result.epochs_run = art.epochs_run;

    std::vector<double> eers;
    for (const auto& [split, scores] : art.split_scores) {
      write_scores(scores, run_dir / "scores" / (split + ".scores.txt"));
      write_labels(scores, run_dir / "scores" / (split + ".labels.txt"));
      const double e = eer(scores).eer_percent;
      result.split_eers.emplace_back(split, e);
      eers.push_back(e);
    }
    if (eers.size() == 4) result.pooled = pooled_eer(eers);
    result.wall_time_s = std::chrono::duration<double>(Clock::now() - t0).count();

    append_result_csv(out_dir / "results.csv", result);
    return result;
  } catch (const std::exception& e) {
    std::ofstream marker(run_dir / "FAILED");
    marker << e.what() << '\n';
    throw;
  }
}

std::vector<RunResult> run_sweep(const SweepSpec& sweep,
                                 const std::filesystem::path& out_dir) {
  const std::vector<ExperimentConfig> grid = sweep.expand();
  std::filesystem::create_directories(out_dir);
  std::vector<RunResult> results;
  std::vector<std::string> failures;
  for (const ExperimentConfig& cfg : grid) {
    try {
      results.push_back(run_experiment(cfg, out_dir));
    } catch (const std::exception& e) {
      failures.push_back(cfg.run_id() + ": " + e.what());
    }
  }
  if (!failures.empty()) {
    std::ofstream out(out_dir / "sweep_failures.txt");
    for (const std::string& f : failures) out << f << '\n';
  }
  return results;
}

void export_embeddings(const std::filesystem::path& checkpoint_path,
                       const ExperimentConfig& cfg, const std::string& split,
                       const std::filesystem::path& out_path) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const DataBundle bundle = load_data_bundle(cfg.data);
  const Dataset* ds = nullptr;
  if (split == "train") {
    ds = &bundle.train;
  } else if (split == "dev") {
    ds = &bundle.dev;
  } else {
    for (const Dataset& e : bundle.evals) {
      if (e.name == split) ds = &e;
    }
  }
  if (ds == nullptr) {
    throw std::invalid_argument("unknown split '" + split + "'");
  }
  const EmbeddingSet set =
      embed_dataset(ckpt.params, *ds, cfg.train.target_frames);
  std::vector<EmbeddingRecord> records;
  records.reserve(set.ids.size());
  for (std::size_t i = 0; i < set.ids.size(); ++i) {
    records.push_back(EmbeddingRecord{set.ids[i], set.labels[i], set.embeddings[i]});
  }
  write_embeddings_jsonl(records, out_path);
}

// --- results CSV -------------------------------------------------------------

namespace {

std::string csv_header(const RunResult& r) {
  std::string header = "run_id,similarity,tau,queue_capacity,e_start,seed";
  for (const auto& [split, e] : r.split_eers) header += ",eer_" + split;
  header += ",pooled_eer,epochs_run,wall_time_s";
  return header;
}

std::string csv_row(const RunResult& r) {
  std::string row = r.run_id + "," + r.similarity + ",";
  if (r.tau.has_value()) row += format_double("%g", *r.tau);
  row += "," + std::to_string(r.queue_capacity) + "," +
         std::to_string(r.e_start) + "," + std::to_string(r.seed);
  for (const auto& [split, e] : r.split_eers) {
    row += "," + format_double("%.6f", e);
  }
  row += ",";
  if (r.pooled.has_value()) row += format_double("%.6f", *r.pooled);
  row += "," + std::to_string(r.epochs_run) + "," +
         format_double("%.3f", r.wall_time_s);
  return row;
}

// RAII for flock-guarded appends.
struct LockedFile {
  int fd = -1;
  explicit LockedFile(const std::filesystem::path& path) {
    fd = ::open(path.c_str(), O_CREAT | O_RDWR | O_APPEND, 0644);
    if (fd < 0) {
      throw std::runtime_error("cannot open " + path.string());
    }
    if (::flock(fd, LOCK_EX) != 0) {
      ::close(fd);
      fd = -1;
      throw std::runtime_error("cannot lock " + path.string());
    }
  }
  ~LockedFile() {
    if (fd >= 0) {
      ::flock(fd, LOCK_UN);
      ::close(fd);
    }
  }
  void write_line(const std::string& line) {
    const std::string data = line + "\n";
    if (::write(fd, data.data(), data.size()) !=
        static_cast<ssize_t>(data.size())) {
      throw std::runtime_error("short write to results CSV");
    }
  }
};

}  // namespace

void append_result_csv(const std::filesystem::path& csv_path,
                       const RunResult& result) {
  const std::string header = csv_header(result);
  LockedFile file(csv_path);
  const off_t size = ::lseek(file.fd, 0, SEEK_END);
  if (size == 0) {
    file.write_line(header);
  } else {
    // Validate that the split columns match the existing file.
    std::string first_line;
    char buf[4096];
    const ssize_t n = ::pread(file.fd, buf, sizeof(buf) - 1, 0);
    if (n > 0) {
      buf[n] = '\0';
      const char* nl = std::strchr(buf, '\n');
      first_line.assign(buf, nl != nullptr ? static_cast<std::size_t>(nl - buf)
                                           : static_cast<std::size_t>(n));
    }
    if (first_line != header) {
      throw std::runtime_error("results CSV header mismatch in " +
                               csv_path.string());
    }
  }
  file.write_line(csv_row(result));
}

std::vector<std::map<std::string, std::string>> read_results_csv(
    const std::filesystem::path& csv_path) {
  std::ifstream in(csv_path);
  if (!in) {
    throw std::runtime_error("cannot open results CSV: " + csv_path.string());
  }
  auto split_line = [](const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
  };
  std::string line;
  if (!std::getline(in, line)) return {};
  const std::vector<std::string> header = split_line(line);
  std::vector<std::map<std::string, std::string>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_line(line);
    if (fields.size() != header.size()) {
      throw std::runtime_error(csv_path.string() + ":" +
                               std::to_string(line_no) + ": column count " +
                               std::to_string(fields.size()) +
                               " does not match header");
    }
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < header.size(); ++i) row[header[i]] = fields[i];
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace supcon
