#include <CLI11.hpp>

#include "tgf/datagen.hpp"
#include "tgf/objective.hpp"
#include "tgf/plot.hpp"
#include "tgf/rng.hpp"
#include "tgf/scene_io.hpp"
#include "tgf/train.hpp"

#include <filesystem>
#include <iostream>
#include <map>

namespace fs = std::filesystem;
using namespace tgf;

namespace {

// Binds every TrainConfig key to a CLI flag. The staging struct receives CLI
// values; resolve() starts from the config file (when given) and copies over
// exactly the fields the user passed on the command line.
class ConfigCli {
 public:
  void attach(CLI::App* app, TrainConfig& cfg) {
    app->add_option("--config", config_file_, "Config file (JSON)")->check(CLI::ExistingFile);
    bind(app->add_option("--epochs", cfg.epochs, "Training epochs"),
         [](TrainConfig& b, const TrainConfig& s) { b.epochs = s.epochs; });
    bind(app->add_option("--batch-size", cfg.batch_size, "Scenes per optimizer step"),
         [](TrainConfig& b, const TrainConfig& s) { b.batch_size = s.batch_size; });
    bind(app->add_option("--lr", cfg.lr, "Initial learning rate"),
         [](TrainConfig& b, const TrainConfig& s) { b.lr = s.lr; });
    bind(app->add_option("--k", cfg.model.K, "Number of predicted modes"),
         [](TrainConfig& b, const TrainConfig& s) { b.model.K = s.model.K; });
    bind(app->add_option("--feature-dim", cfg.model.feature_dim, "Node feature width"),
         [](TrainConfig& b, const TrainConfig& s) { b.model.feature_dim = s.model.feature_dim; });
    bind(app->add_option("--noise-sigma", cfg.noise_sigma, "Augmentation noise stddev (m)"),
         [](TrainConfig& b, const TrainConfig& s) { b.noise_sigma = s.noise_sigma; });
    bind(app->add_flag("--augment,!--no-augment", cfg.augment, "Scale/noise augmentation"),
         [](TrainConfig& b, const TrainConfig& s) { b.augment = s.augment; });
    bind(app->add_flag("--tg,!--no-tg", cfg.model.toggles.tg, "Temporal graph updates"),
         [](TrainConfig& b, const TrainConfig& s) { b.model.toggles.tg = s.model.toggles.tg; });
    bind(app->add_flag("--seq-mem,!--no-seq-mem", cfg.model.toggles.seq_mem,
                       "Sequential memory"),
         [](TrainConfig& b, const TrainConfig& s) {
           b.model.toggles.seq_mem = s.model.toggles.seq_mem;
         });
    bind(app->add_flag("--scene-mem,!--no-scene-mem", cfg.model.toggles.scene_mem,
                       "Scene memory"),
         [](TrainConfig& b, const TrainConfig& s) {
           b.model.toggles.scene_mem = s.model.toggles.scene_mem;
         });
    bind(app->add_flag("--goal-pred,!--no-goal-pred", cfg.model.toggles.goal_pred,
                       "Goal-conditioned decoding"),
         [](TrainConfig& b, const TrainConfig& s) {
           b.model.toggles.goal_pred = s.model.toggles.goal_pred;
         });
    bind(app->add_flag("--goal-loss,!--no-goal-loss", cfg.model.toggles.goal_loss,
                       "Goal regression loss"),
         [](TrainConfig& b, const TrainConfig& s) {
           b.model.toggles.goal_loss = s.model.toggles.goal_loss;
         });
    bind(app->add_flag("--per-step-state,!--no-per-step-state", cfg.model.per_step_state,
                       "Re-embed node positions at every step"),
         [](TrainConfig& b, const TrainConfig& s) {
           b.model.per_step_state = s.model.per_step_state;
         });
    bind(app->add_flag("--scene-mem-mlp,!--no-scene-mem-mlp", cfg.model.scene_mem_mlp,
                       "Extra MLP after each scene-memory layer"),
         [](TrainConfig& b, const TrainConfig& s) {
           b.model.scene_mem_mlp = s.model.scene_mem_mlp;
         });
    bind(app->add_option("--goal-agent-source", goal_source_, "composite|enhanced")
             ->check(CLI::IsMember({"composite", "enhanced"})),
         [this](TrainConfig& b, const TrainConfig&) {
           b.model.goal_agent_source_full = goal_source_ == "composite";
         });
    bind(app->add_option("--lane-filter", lane_filter_, "any_agent|aoi_only")
             ->check(CLI::IsMember({"any_agent", "aoi_only"})),
         [this](TrainConfig& b, const TrainConfig&) {
           b.lane_filter = lane_filter_ == "any_agent" ? LaneFilterVariant::kAnyAgent
                                                       : LaneFilterVariant::kAoiOnly;
         });
    bind(app->add_option("--loss-w-traj", cfg.loss_weights.traj, "Trajectory loss weight"),
         [](TrainConfig& b, const TrainConfig& s) { b.loss_weights.traj = s.loss_weights.traj; });
    bind(app->add_option("--loss-w-goal-reg", cfg.loss_weights.goal_reg,
                         "Goal regression weight"),
         [](TrainConfig& b, const TrainConfig& s) {
           b.loss_weights.goal_reg = s.loss_weights.goal_reg;
         });
    bind(app->add_option("--loss-w-goal-cls", cfg.loss_weights.goal_cls, "Goal scoring weight"),
         [](TrainConfig& b, const TrainConfig& s) {
           b.loss_weights.goal_cls = s.loss_weights.goal_cls;
         });
  }

  TrainConfig resolve(const TrainConfig& staging) const {
    if (config_file_.empty()) {
      TrainConfig out = staging;
      if (!goal_source_.empty()) out.model.goal_agent_source_full = goal_source_ == "composite";
      if (!lane_filter_.empty()) {
        out.lane_filter = lane_filter_ == "any_agent" ? LaneFilterVariant::kAnyAgent
                                                      : LaneFilterVariant::kAoiOnly;
      }
      return out;
    }
    TrainConfig base = load_config(config_file_);
    base.seed = staging.seed;
    for (const auto& [opt, apply] : appliers_) {
      if (opt->count() > 0) apply(base, staging);
    }
    return base;
  }

 private:
  void bind(CLI::Option* opt, std::function<void(TrainConfig&, const TrainConfig&)> apply) {
    appliers_.emplace_back(opt, std::move(apply));
  }

  std::string config_file_;
  std::string goal_source_;
  std::string lane_filter_;
  std::vector<std::pair<CLI::Option*, std::function<void(TrainConfig&, const TrainConfig&)>>>
      appliers_;
};

std::vector<const RawScene*> select_split(const Dataset& data, const std::string& split) {
  std::vector<const RawScene*> out;
  const auto push_all = [&out](const std::vector<RawScene>& v) {
    for (const auto& s : v) out.push_back(&s);
  };
  if (split == "train") {
    push_all(data.train);
  } else if (split == "val") {
    push_all(data.val);
  } else if (split == "all") {
    push_all(data.train);
    push_all(data.val);
  } else {
    throw ValidationError("split must be train|val|all, got " + split);
  }
  return out;
}

std::vector<RawScene> materialize(const std::vector<const RawScene*>& ptrs) {
  std::vector<RawScene> out;
  out.reserve(ptrs.size());
  for (const auto* p : ptrs) out.push_back(*p);
  return out;
}

Model load_model_for(const TrainConfig& cfg, const std::string& checkpoint) {
  Model model(cfg.model);
  const std::uint64_t stored = load_checkpoint(model.params(), checkpoint);
  if (stored != model.arch_hash()) {
    throw ValidationError("checkpoint " + checkpoint +
                          " was written by an incompatible model configuration");
  }
  return model;
}

std::map<std::string, ModelToggles> ablation_variants() {
  std::map<std::string, ModelToggles> v;
  v["naive"] = {false, false, false, false, false};
  v["tg"] = {true, false, false, false, false};
  v["tg_seq"] = {true, true, false, false, false};
  v["tg_scene"] = {true, false, true, false, false};
  v["tg_seq_scene"] = {true, true, true, false, false};
  v["tg_seq_scene_goal"] = {true, true, true, true, false};
  v["full"] = {true, true, true, true, true};
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal-graph motion forecasting toolkit"};
  app.require_subcommand(1);

  // ---- gen-data ----
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic scene dataset");
  std::string gen_out;
  std::uint64_t gen_seed = 0;
  std::vector<std::string> gen_counts;
  double val_fraction = 0.2;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--seed", gen_seed, "Master seed")->required();
  gen->add_option("--template", gen_counts,
                  "template=count (repeatable); defaults to a mixed suite");
  gen->add_option("--val-fraction", val_fraction, "Validation split fraction");

  // ---- train ----
  auto* tr = app.add_subcommand("train", "Train a model");
  std::string tr_data, tr_out;
  TrainConfig tr_cfg;
  ConfigCli tr_cli;
  tr->add_option("--data", tr_data, "Dataset directory")->required();
  tr->add_option("--out", tr_out, "Run output directory")->required();
  tr->add_option("--seed", tr_cfg.seed, "Training seed")->required();
  tr_cli.attach(tr, tr_cfg);

  // ---- eval ----
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string ev_ckpt, ev_data, ev_out = "metrics.txt", ev_split = "val";
  TrainConfig ev_cfg;
  ConfigCli ev_cli;
  ev->add_option("--checkpoint", ev_ckpt, "Checkpoint file")->required();
  ev->add_option("--data", ev_data, "Dataset directory")->required();
  ev->add_option("--split", ev_split, "train|val|all");
  ev->add_option("--out", ev_out, "Metrics report path");
  ev_cli.attach(ev, ev_cfg);

  // ---- predict ----
  auto* pr = app.add_subcommand("predict", "Write prediction records");
  std::string pr_ckpt, pr_data, pr_out, pr_split = "val", pr_frame = "normalized";
  TrainConfig pr_cfg;
  ConfigCli pr_cli;
  pr->add_option("--checkpoint", pr_ckpt, "Checkpoint file")->required();
  pr->add_option("--data", pr_data, "Dataset directory")->required();
  pr->add_option("--out", pr_out, "Prediction file")->required();
  pr->add_option("--split", pr_split, "train|val|all");
  pr->add_option("--frame", pr_frame, "normalized|raw");
  pr_cli.attach(pr, pr_cfg);

  // ---- plot ----
  auto* pl = app.add_subcommand("plot", "Render one scene and its prediction");
  std::string pl_scene, pl_preds, pl_out, pl_id;
  pl->add_option("--scene", pl_scene, "Scene record file")->required();
  pl->add_option("--predictions", pl_preds, "Prediction file")->required();
  pl->add_option("--out", pl_out, "Output SVG")->required();
  pl->add_option("--scene-id", pl_id, "Scene id when the file holds several");

  // ---- grad-check ----
  auto* gc = app.add_subcommand("grad-check", "Finite-difference gradient verification");
  int gc_scenes = 20;
  int gc_dim = 8;
  std::uint64_t gc_seed = 1;
  double gc_eps = 1e-6, gc_tol = 1e-4;
  gc->add_option("--scenes", gc_scenes, "Number of random micro-scenes");
  gc->add_option("--feature-dim", gc_dim, "Reduced feature width");
  gc->add_option("--seed", gc_seed, "Seed");
  gc->add_option("--eps", gc_eps, "Finite-difference step");
  gc->add_option("--tolerance", gc_tol, "Max allowed relative error");

  // ---- ablate ----
  auto* ab = app.add_subcommand("ablate", "Run the ablation toggle grid");
  std::string ab_data, ab_out, ab_variants = "table1";
  TrainConfig ab_cfg;
  ConfigCli ab_cli;
  ab->add_option("--data", ab_data, "Dataset directory")->required();
  ab->add_option("--out", ab_out, "Output directory")->required();
  ab->add_option("--seed", ab_cfg.seed, "Training seed")->required();
  ab->add_option("--variants", ab_variants, "table1 or comma-separated variant names");
  ab_cli.attach(ab, ab_cfg);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      DatasetSpec spec;
      spec.val_fraction = val_fraction;
      if (gen_counts.empty()) {
        gen_counts = {"straight=20", "curve=10", "yield=30", "turn_left=20", "turn_right=20"};
      }
      for (const auto& entry : gen_counts) {
        const auto eq = entry.find('=');
        if (eq == std::string::npos) {
          throw ValidationError("--template expects name=count, got " + entry);
        }
        spec.counts.emplace_back(standard_template(entry.substr(0, eq)),
                                 std::stoi(entry.substr(eq + 1)));
      }
      const Manifest manifest = gen_dataset(spec, gen_seed, gen_out);
      std::cout << "wrote " << manifest.entries.size() << " scenes to " << gen_out << "\n";
    } else if (*tr) {
      TrainConfig cfg = tr_cli.resolve(tr_cfg);
      cfg.validate();
      const Dataset data = load_dataset(tr_data);
      Model model(cfg.model);
      model.initialize(cfg.seed);
      const RunRecord record = train(model, cfg, data, tr_out);
      std::cout << "trained " << record.epochs.size() << " epochs, " << record.total_steps
                << " optimizer steps; best checkpoint " << record.best_checkpoint << "\n";
    } else if (*ev) {
      const TrainConfig cfg = ev_cli.resolve(ev_cfg);
      const Dataset data = load_dataset(ev_data);
      const Model model = load_model_for(cfg, ev_ckpt);
      const auto scenes = materialize(select_split(data, ev_split));
      const MetricsReport report = evaluate(model, scenes, cfg.lane_filter);
      write_metrics_report(report, ev_out);
      std::cout << "scenes=" << report.per_scene.size() << " minADE=" << report.mean_min_ade
                << " minFDE=" << report.mean_min_fde << " MR=" << report.miss_rate
                << " b-minFDE=" << report.mean_b_min_fde << "\n";
    } else if (*pr) {
      const TrainConfig cfg = pr_cli.resolve(pr_cfg);
      const Dataset data = load_dataset(pr_data);
      const Model model = load_model_for(cfg, pr_ckpt);
      const auto scenes = materialize(select_split(data, pr_split));
      const auto outputs = predict_scenes(model, scenes, cfg.lane_filter);
      save_predictions(outputs, pr_out, pr_frame == "raw");
      std::cout << "wrote " << outputs.size() << " prediction records to " << pr_out << "\n";
    } else if (*pl) {
      const RawScene raw = load_scene(pl_scene);
      const auto predictions = load_predictions(pl_preds);
      const ForecastOutput* chosen = nullptr;
      for (const auto& p : predictions) {
        if (pl_id.empty() || p.scene_id == pl_id) {
          if (p.scene_id == raw.scene_id) {
            chosen = &p;
            break;
          }
        }
      }
      if (chosen == nullptr) {
        throw ValidationError("no prediction matches scene " + raw.scene_id);
      }
      plot_scene(preprocess(raw), *chosen, pl_out);
      std::cout << "wrote " << pl_out << "\n";
    } else if (*gc) {
      ModelConfig mc;
      mc.feature_dim = gc_dim;
      mc.K = 4;
      Model model(mc);
      model.initialize(gc_seed);
      model.params().jitter(derive_seed(gc_seed, 0x917), 0.05);
      const std::vector<std::string> templates = {"yield", "straight", "turn_left",
                                                  "yield_heavy"};
      double worst = 0.0;
      for (int i = 0; i < gc_scenes; ++i) {
        const auto tmpl = standard_template(templates[static_cast<std::size_t>(i) %
                                                      templates.size()]);
        const RawScene raw = gen_scene(tmpl, derive_seed(gc_seed, static_cast<std::uint64_t>(i)));
        const auto report = model_grad_check(model, preprocess(raw), LossWeights{}, gc_eps);
        worst = std::max(worst, report.max_rel_error);
        std::cout << "scene " << i << " (" << tmpl.name
                  << "): max rel err = " << report.max_rel_error << " [" << report.worst_block
                  << "]\n";
      }
      std::cout << "worst over " << gc_scenes << " scenes: " << worst << "\n";
      if (worst >= gc_tol) {
        throw NumericalError("gradient check failed: " + std::to_string(worst));
      }
    } else if (*ab) {
      TrainConfig base = ab_cli.resolve(ab_cfg);
      const Dataset data = load_dataset(ab_data);
      const auto all = ablation_variants();
      std::vector<std::string> names;
      if (ab_variants == "table1") {
        names = {"naive", "tg", "tg_seq", "tg_scene", "tg_seq_scene", "tg_seq_scene_goal",
                 "full"};
      } else {
        std::string rest = ab_variants;
        while (!rest.empty()) {
          const auto comma = rest.find(',');
          names.push_back(rest.substr(0, comma));
          rest = comma == std::string::npos ? "" : rest.substr(comma + 1);
        }
      }
      fs::create_directories(ab_out);
      std::ofstream summary(fs::path(ab_out) / "ablation.tsv");
      summary << "variant\tmin_ade\tmin_fde\tmiss_rate\tb_min_fde\n";
      for (const auto& name : names) {
        const auto it = all.find(name);
        if (it == all.end()) throw ValidationError("unknown variant: " + name);
        TrainConfig cfg = base;
        cfg.model.toggles = it->second;
        cfg.validate();
        Model model(cfg.model);
        model.initialize(cfg.seed);
        const std::string run_dir = (fs::path(ab_out) / name).string();
        train(model, cfg, data, run_dir);
        const MetricsReport report =
            evaluate(model, data.val.empty() ? data.train : data.val, cfg.lane_filter);
        char line[256];
        std::snprintf(line, sizeof(line), "%s\t%.6f\t%.6f\t%.6f\t%.6f\n", name.c_str(),
                      report.mean_min_ade, report.mean_min_fde, report.miss_rate,
                      report.mean_b_min_fde);
        summary << line;
        std::cout << name << ": minFDE=" << report.mean_min_fde << "\n";
      }
    }
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
