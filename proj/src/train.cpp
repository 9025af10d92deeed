#include "tgf/train.hpp"

#include "tgf/rng.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

namespace tgf {

NormalizedScene preprocess(const RawScene& raw, LaneFilterVariant variant) {
  return filter_lanes(normalize_scene(raw), kLaneFilterRadius, variant);
}

namespace {

std::string checkpoint_name(int epoch) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "checkpoint_epoch_%03d.ckpt", epoch);
  return buf;
}

}  // namespace

RunRecord train(Model& model, const TrainConfig& cfg, const Dataset& data,
                const std::string& out_dir, const TrainCallbacks& callbacks) {
  namespace fs = std::filesystem;
  cfg.validate();
  if (data.train.empty()) throw ValidationError("train: empty training set");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());

  const auto t_start = std::chrono::steady_clock::now();

  std::vector<NormalizedScene> train_scenes;
  train_scenes.reserve(data.train.size());
  for (const auto& raw : data.train) train_scenes.push_back(preprocess(raw, cfg.lane_filter));

  AdamState adam = AdamState::fresh(model.params());
  RunRecord record;
  record.config_hash = cfg.config_hash();
  record.arch_hash = model.arch_hash();

  double best_b_min_fde = std::numeric_limits<double>::infinity();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = lr_at_epoch(cfg, epoch);

    std::vector<std::size_t> order(train_scenes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(derive_seed(cfg.seed, 0x5E0000ULL + static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    int steps_this_epoch = 0;
    std::size_t cursor = 0;
    long scene_counter = 0;
    while (cursor < order.size()) {
      const std::size_t batch_end =
          std::min(order.size(), cursor + static_cast<std::size_t>(cfg.batch_size));
      model.params().zero_grads();
      for (std::size_t b = cursor; b < batch_end; ++b, ++scene_counter) {
        const NormalizedScene& base = train_scenes[order[b]];
        NormalizedScene instance = base;
        if (cfg.augment) {
          Rng aug(derive_seed(cfg.seed, 0xA6000000ULL +
                                            static_cast<std::uint64_t>(epoch) * 1000003ULL +
                                            static_cast<std::uint64_t>(scene_counter)));
          instance = augment_scale(instance, aug.uniform(0.75, 1.25));
          if (cfg.noise_sigma > 0.0) {
            instance = augment_noise(instance, cfg.noise_sigma, aug.next_u64());
          }
        }
        const SceneInputs inputs = prepare_inputs(instance);
        Tape tape;
        const ParamVars pv = lift_params(tape, model.params());
        const ForwardGraph fg = model.build(tape, pv, inputs);
        const Matrix gt = gt_matrix(instance.gt_future);
        const LossGraph lg =
            build_loss(tape, fg, gt, cfg.loss_weights, model.config().toggles);
        const double loss = tape.value(lg.total)(0, 0);
        if (!std::isfinite(loss)) {
          throw NumericalError("train: non-finite loss at scene " + instance.scene_id +
                               ", optimizer step " + std::to_string(record.total_steps + 1));
        }
        loss_sum += loss;
        tape.backward(lg.total);
        accumulate_param_grads(tape, pv, model.params());
      }
      model.params().scale_grads(1.0 / static_cast<double>(batch_end - cursor));
      adam_step(model.params(), adam, lr);
      ++steps_this_epoch;
      ++record.total_steps;
      cursor = batch_end;
    }

    EpochRecord er;
    er.epoch = epoch;
    er.lr = lr;
    er.mean_train_loss = loss_sum / static_cast<double>(train_scenes.size());
    er.optimizer_steps = steps_this_epoch;

    if (!data.val.empty()) {
      const MetricsReport val = evaluate(model, data.val, cfg.lane_filter);
      er.val_min_ade = val.mean_min_ade;
      er.val_min_fde = val.mean_min_fde;
      er.val_miss_rate = val.miss_rate;
      er.val_b_min_fde = val.mean_b_min_fde;
      if (val.mean_b_min_fde < best_b_min_fde) {
        best_b_min_fde = val.mean_b_min_fde;
        save_checkpoint(model.params(), model.arch_hash(),
                        (fs::path(out_dir) / "best.ckpt").string());
        record.best_checkpoint = "best.ckpt";
      }
    }

    er.checkpoint = checkpoint_name(epoch);
    save_checkpoint(model.params(), model.arch_hash(),
                    (fs::path(out_dir) / er.checkpoint).string());
    record.epochs.push_back(er);
    if (callbacks.after_epoch && !callbacks.after_epoch(record.epochs.back())) break;
  }

  if (record.best_checkpoint.empty()) {
    // No validation split: the final checkpoint stands in for best.
    save_checkpoint(model.params(), model.arch_hash(),
                    (fs::path(out_dir) / "best.ckpt").string());
    record.best_checkpoint = "best.ckpt";
  }

  record.wall_clock_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  save_run_record(record, (fs::path(out_dir) / "run_record.json").string());
  return record;
}

void save_run_record(const RunRecord& record, const std::string& path) {
  nlohmann::ordered_json j;
  j["config_hash"] = record.config_hash;
  j["arch_hash"] = record.arch_hash;
  j["total_steps"] = record.total_steps;
  j["wall_clock_sec"] = record.wall_clock_sec;
  j["best_checkpoint"] = record.best_checkpoint;
  j["epochs"] = nlohmann::ordered_json::array();
  for (const auto& e : record.epochs) {
    j["epochs"].push_back(nlohmann::ordered_json{{"epoch", e.epoch},
                                                 {"lr", e.lr},
                                                 {"mean_train_loss", e.mean_train_loss},
                                                 {"optimizer_steps", e.optimizer_steps},
                                                 {"val_min_ade", e.val_min_ade},
                                                 {"val_min_fde", e.val_min_fde},
                                                 {"val_miss_rate", e.val_miss_rate},
                                                 {"val_b_min_fde", e.val_b_min_fde},
                                                 {"checkpoint", e.checkpoint}});
  }
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os << j.dump(1) << "\n";
}

MetricsReport evaluate(const Model& model, const std::vector<RawScene>& scenes,
                       LaneFilterVariant variant) {
  if (scenes.empty()) throw ValidationError("evaluate: empty dataset");
  std::vector<SceneMetrics> per_scene;
  per_scene.reserve(scenes.size());
  for (const auto& raw : scenes) {
    if (raw.gt_future.empty()) {
      throw ValidationError("evaluate: scene " + raw.scene_id + " lacks ground truth");
    }
    const NormalizedScene norm = preprocess(raw, variant);
    const ForecastOutput out = model.forecast(norm);
    per_scene.push_back(evaluate_scene(norm.scene_id, out.trajectories, out.probabilities,
                                       gt_matrix(norm.gt_future)));
  }
  return aggregate(std::move(per_scene), model.config().K);
}

std::vector<ForecastOutput> predict_scenes(const Model& model,
                                           const std::vector<RawScene>& scenes,
                                           LaneFilterVariant variant) {
  std::vector<ForecastOutput> outputs;
  outputs.reserve(scenes.size());
  for (const auto& raw : scenes) {
    outputs.push_back(model.forecast(preprocess(raw, variant)));
  }
  return outputs;
}

MetricsReport evaluate_predictions(const std::vector<ForecastOutput>& predictions,
                                   const std::vector<RawScene>& scenes,
                                   LaneFilterVariant variant) {
  if (predictions.empty()) throw ValidationError("evaluate_predictions: empty predictions");
  std::map<std::string, const RawScene*> by_id;
  for (const auto& s : scenes) by_id[s.scene_id] = &s;
  std::vector<SceneMetrics> per_scene;
  int K = 0;
  for (const auto& pred : predictions) {
    const auto it = by_id.find(pred.scene_id);
    if (it == by_id.end()) {
      throw ValidationError("evaluate_predictions: no scene with id " + pred.scene_id);
    }
    const NormalizedScene norm = preprocess(*it->second, variant);
    K = static_cast<int>(pred.trajectories.size());
    per_scene.push_back(evaluate_scene(pred.scene_id, pred.trajectories, pred.probabilities,
                                       gt_matrix(norm.gt_future)));
  }
  return aggregate(std::move(per_scene), K);
}

}  // namespace tgf
