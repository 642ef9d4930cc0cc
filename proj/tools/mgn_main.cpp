// mgn: dataset synthesis, training, prediction, evaluation and ensembling
// for the multi-granularity affective prediction pipeline.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mgn/errors.hpp"
#include "mgn/eval.hpp"
#include "mgn/experiments.hpp"
#include "mgn/synth.hpp"
#include "mgn/trainer.hpp"
#include "mgn/video_level.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitMissingInput = 3;
constexpr int kExitNumerical = 4;

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw mgn::IoError("cannot write " + path.string());
  out << text;
  if (!text.empty() && text.back() != '\n') out << "\n";
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw mgn::IoError("cannot read " + path.string());
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

std::vector<uint64_t> seed_list(uint64_t base, int count) {
  std::vector<uint64_t> seeds;
  for (int i = 0; i < count; ++i) seeds.push_back(base + i);
  return seeds;
}

// Flag plumbing shared by train and ablate. Precedence:
// explicit flags > --config file > preset defaults.
struct TrainFlags {
  std::string preset;
  std::string config_file;
  uint64_t seed = 0;
  double lr = 0.0;
  int batch = 0;
  int epochs = 0;
  int fused_dim = 0;
  int experts = 0;
  int hidden = 0;
  double dropout = -1.0;
  bool no_attention = false;
  std::vector<std::string> modalities;

  CLI::Option* seed_opt = nullptr;
  CLI::Option* lr_opt = nullptr;
  CLI::Option* batch_opt = nullptr;
  CLI::Option* epochs_opt = nullptr;
  CLI::Option* fused_opt = nullptr;
  CLI::Option* experts_opt = nullptr;
  CLI::Option* hidden_opt = nullptr;
  CLI::Option* dropout_opt = nullptr;
  CLI::Option* mods_opt = nullptr;

  void attach(CLI::App* cmd, const std::string& default_preset) {
    preset = default_preset;
    cmd->add_option("--preset", preset,
                    "Config defaults: small (desk-scale) or paper")
        ->check(CLI::IsMember({"small", "paper"}));
    cmd->add_option("--config", config_file, "Training config JSON file");
    seed_opt = cmd->add_option("--seed", seed, "Training seed");
    lr_opt = cmd->add_option("--lr", lr, "Adam learning rate");
    batch_opt = cmd->add_option("--batch", batch, "Mini-batch size");
    epochs_opt = cmd->add_option("--epochs", epochs, "Training epochs");
    fused_opt = cmd->add_option("--fused-dim", fused_dim,
                                "Fused multi-modal feature width");
    experts_opt = cmd->add_option("--experts", experts, "MOE expert count");
    hidden_opt = cmd->add_option("--hidden", hidden, "Expert hidden width");
    dropout_opt =
        cmd->add_option("--dropout", dropout, "Modal dropout probability");
    cmd->add_flag("--no-attention", no_attention,
                  "Plain concatenation fusion (ablation baseline)");
    mods_opt = cmd->add_option("--modalities", modalities,
                               "Comma-separated modality list")
                   ->delimiter(',');
  }

  mgn::TrainConfig resolve() const {
    mgn::TrainConfig cfg = preset == "small"
                               ? mgn::small_preset_train_config()
                               : mgn::TrainConfig{};
    if (!config_file.empty())
      cfg = mgn::TrainConfig::from_json(read_text(config_file));
    if (*seed_opt) cfg.seed = seed;
    if (*lr_opt) cfg.learning_rate = lr;
    if (*batch_opt) cfg.batch_size = batch;
    if (*epochs_opt) cfg.epochs = epochs;
    if (*fused_opt) cfg.fused_dim = fused_dim;
    if (*experts_opt) cfg.n_experts = experts;
    if (*hidden_opt) cfg.expert_hidden = hidden;
    if (*dropout_opt) cfg.modal_dropout_p = dropout;
    if (no_attention) cfg.use_attention = false;
    if (*mods_opt) cfg.modalities = modalities;
    return cfg;
  }
};

int cmd_synth(const std::string& out_dir, const std::string& preset,
              const std::string& spec_file, CLI::Option* seed_opt,
              uint64_t seed, CLI::Option* videos_opt, int videos,
              CLI::Option* frames_opt, int frames, CLI::Option* noise_opt,
              double noise, CLI::Option* tracknoise_opt, double tracknoise) {
  mgn::SynthSpec spec = preset == "paper" ? mgn::SynthSpec::paper(1)
                                          : mgn::SynthSpec::small(1);
  if (!spec_file.empty())
    spec = mgn::SynthSpec::from_json(read_text(spec_file));
  if (*seed_opt) spec.seed = seed;
  if (*videos_opt) spec.n_videos = videos;
  if (*frames_opt) spec.frames_per_video = frames;
  if (*noise_opt) spec.noise_floor = noise;
  if (*tracknoise_opt) spec.track_noise = tracknoise;

  mgn::generate(spec, out_dir);
  write_text(fs::path(out_dir) / "synth_spec.json", spec.to_json());
  std::cout << "wrote " << spec.n_videos << " videos to " << out_dir
            << " (manifest.json)\n";
  return 0;
}

int cmd_train(const std::string& manifest, const std::string& run_dir,
              const TrainFlags& flags) {
  mgn::TrainConfig cfg = flags.resolve();
  mgn::Dataset ds = mgn::load_dataset(manifest, cfg.modalities);
  fs::create_directories(run_dir);
  write_text(fs::path(run_dir) / "config.json", cfg.to_json());

  mgn::FrameTrainResult result = mgn::train_frame_model(ds, cfg);
  mgn::save_frame_checkpoint(fs::path(run_dir) / "checkpoint", result.model,
                             cfg, &result.adam);
  write_text(fs::path(run_dir) / "report.json", result.report.to_json());
  std::cout << "best epoch " << result.report.best_epoch
            << ", validation correlation " << result.report.best_correlation
            << "\n";
  return 0;
}

int cmd_train_video(const std::string& manifest, const std::string& run_dir,
                    const std::string& preset, const std::string& config_file,
                    CLI::Option* seed_opt, uint64_t seed, CLI::Option* lr_opt,
                    double lr, CLI::Option* epochs_opt, int epochs,
                    CLI::Option* batch_opt, int batch, CLI::Option* k_opt,
                    int k, CLI::Option* pooled_opt, int pooled,
                    CLI::Option* fused_opt, int fused, CLI::Option* hidden_opt,
                    int hidden, CLI::Option* frames_opt, int frames) {
  mgn::VideoTrainConfig cfg = preset == "small"
                                  ? mgn::small_preset_video_config()
                                  : mgn::VideoTrainConfig{};
  if (!config_file.empty())
    cfg = mgn::VideoTrainConfig::from_json(read_text(config_file));
  if (*seed_opt) cfg.seed = seed;
  if (*lr_opt) cfg.learning_rate = lr;
  if (*epochs_opt) cfg.epochs = epochs;
  if (*batch_opt) cfg.batch_size = batch;
  if (*k_opt) cfg.clusters = k;
  if (*pooled_opt) cfg.pooled_dim = pooled;
  if (*fused_opt) cfg.fused_dim = fused;
  if (*hidden_opt) cfg.hidden_dim = hidden;
  if (*frames_opt) cfg.frames = frames;

  mgn::Dataset ds =
      mgn::load_dataset(manifest, {"image", "audio", "title"});
  fs::create_directories(run_dir);
  write_text(fs::path(run_dir) / "config.json", cfg.to_json());

  mgn::VideoTrainResult result = mgn::train_video_level(ds, cfg);
  mgn::save_video_checkpoint(fs::path(run_dir) / "checkpoint", result.model,
                             cfg, &result.adam);
  write_text(fs::path(run_dir) / "report.json", result.report.to_json());
  std::cout << "best epoch " << result.report.best_epoch
            << ", validation correlation " << result.report.best_correlation
            << "\n";
  return 0;
}

int cmd_export_video(const std::string& manifest,
                     const std::string& checkpoint,
                     std::string out_manifest) {
  mgn::LoadedVideoModel loaded = mgn::load_video_checkpoint(checkpoint);
  mgn::Dataset ds = mgn::load_dataset(manifest, {"image", "audio", "title"});
  const fs::path dataset_dir = fs::path(manifest).parent_path();
  mgn::Manifest updated = mgn::export_video_feature_to(
      loaded.model, ds, loaded.config.frames, dataset_dir);
  if (out_manifest.empty())
    out_manifest = (dataset_dir / "manifest_exported.json").string();
  mgn::save_manifest(updated, out_manifest);
  std::cout << "exported video_theme tracks for " << updated.entries.size()
            << " videos; manifest: " << out_manifest << "\n";
  return 0;
}

int cmd_predict(const std::string& manifest, const std::string& checkpoint,
                const std::string& split, const std::string& out_dir) {
  mgn::LoadedFrameModel loaded = mgn::load_frame_checkpoint(checkpoint);
  mgn::Dataset ds = mgn::load_dataset(manifest, loaded.config.modalities);
  mgn::PredictionSet preds =
      mgn::predict_frame_model(loaded.model, ds,
                               mgn::split_from_string(split),
                               loaded.config.modalities);
  mgn::save_predictions(preds, out_dir);
  std::cout << "wrote " << preds.size() << " prediction tracks to " << out_dir
            << "\n";
  return 0;
}

int cmd_eval(const std::string& manifest, const std::string& pred_dir,
             const std::string& split, const std::string& out_json,
             const std::string& out_csv) {
  mgn::Dataset ds = mgn::load_dataset(manifest, {});
  mgn::PredictionSet preds = mgn::load_predictions(pred_dir);
  mgn::EvalReport report =
      mgn::evaluate(preds, ds, mgn::split_from_string(split));
  if (!out_json.empty()) write_text(out_json, report.to_json());
  if (!out_csv.empty()) write_text(out_csv, report.to_csv());
  std::cout << "overall correlation " << report.overall << " ("
            << report.degenerate_total << " degenerate pairs)\n";
  return 0;
}

int cmd_ensemble(const std::vector<std::string>& pred_dirs,
                 const std::string& out_dir) {
  std::vector<mgn::PredictionSet> sets;
  for (const auto& dir : pred_dirs) sets.push_back(mgn::load_predictions(dir));
  mgn::PredictionSet combined = mgn::ensemble(sets);
  mgn::save_predictions(combined, out_dir);
  std::cout << "averaged " << sets.size() << " prediction sets into "
            << out_dir << "\n";
  return 0;
}

int cmd_gradcheck(double tolerance) {
  bool ok = true;
  for (const auto& c : mgn::run_gradcheck_suite()) {
    const bool pass = c.report.passes(tolerance);
    ok = ok && pass;
    std::cout << (pass ? "PASS " : "FAIL ") << c.name << ": max rel err "
              << c.report.max_rel_error << " over " << c.report.checked
              << " values\n";
  }
  if (!ok) throw mgn::NumericalError("gradient check failed");
  return 0;
}

int cmd_ablate(const std::string& manifest, const std::string& run_dir,
               const TrainFlags& flags, uint64_t seed_base, int n_seeds,
               bool methods, int trials) {
  mgn::TrainConfig base = flags.resolve();
  // Load every ladder modality once; rungs select subsets.
  mgn::Dataset ds =
      mgn::load_dataset(manifest, mgn::ablation_rungs().back());
  fs::create_directories(run_dir);
  write_text(fs::path(run_dir) / "config.json", base.to_json());

  const auto seeds = seed_list(seed_base, n_seeds);
  mgn::LadderResult ladder = mgn::run_ablation_ladder(ds, base, seeds);
  write_text(fs::path(run_dir) / "ladder.json", ladder.to_json());
  std::cout << ladder.to_table();
  std::cout << "nondecreasing ladders: " << ladder.monotone_seeds << "/"
            << seeds.size() << " seeds\n";

  if (methods) {
    mgn::MethodComparison cmp =
        mgn::run_method_comparison(ds, base, seeds, trials);
    write_text(fs::path(run_dir) / "methods.json", cmp.to_json());
    std::cout << cmp.to_table();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-granularity affective prediction pipeline"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  std::string synth_out, synth_preset = "small", synth_spec;
  uint64_t synth_seed = 1;
  int synth_videos = 0, synth_frames = 0;
  double synth_noise = 0.0, synth_tracknoise = 0.0;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--preset", synth_preset, "small or paper")
      ->check(CLI::IsMember({"small", "paper"}));
  synth->add_option("--spec", synth_spec, "SynthSpec JSON file");
  auto* synth_seed_opt = synth->add_option("--seed", synth_seed, "Seed");
  auto* synth_videos_opt =
      synth->add_option("--videos", synth_videos, "Video count");
  auto* synth_frames_opt =
      synth->add_option("--frames", synth_frames, "Frames per video");
  auto* synth_noise_opt =
      synth->add_option("--noise-floor", synth_noise, "Label noise amplitude");
  auto* synth_tracknoise_opt = synth->add_option(
      "--track-noise", synth_tracknoise, "Feature measurement noise");

  // train
  auto* train = app.add_subcommand("train", "Train the frame-level model");
  std::string train_manifest, train_run;
  TrainFlags train_flags;
  train->add_option("--manifest", train_manifest, "Dataset manifest")
      ->required();
  train->add_option("--run-dir", train_run, "Run directory")->required();
  train_flags.attach(train, "paper");

  // train-video
  auto* tv = app.add_subcommand("train-video",
                                "Train the video-level expression network");
  std::string tv_manifest, tv_run, tv_preset = "paper", tv_config;
  uint64_t tv_seed = 0;
  double tv_lr = 0.0;
  int tv_epochs = 0, tv_batch = 0, tv_k = 0, tv_pooled = 0, tv_fused = 0,
      tv_hidden = 0, tv_frames = 0;
  tv->add_option("--manifest", tv_manifest, "Dataset manifest")->required();
  tv->add_option("--run-dir", tv_run, "Run directory")->required();
  tv->add_option("--preset", tv_preset, "small or paper")
      ->check(CLI::IsMember({"small", "paper"}));
  tv->add_option("--config", tv_config, "VideoTrainConfig JSON file");
  auto* tv_seed_opt = tv->add_option("--seed", tv_seed, "Seed");
  auto* tv_lr_opt = tv->add_option("--lr", tv_lr, "Learning rate");
  auto* tv_epochs_opt = tv->add_option("--epochs", tv_epochs, "Epochs");
  auto* tv_batch_opt = tv->add_option("--batch", tv_batch, "Video batch size");
  auto* tv_k_opt = tv->add_option("--clusters", tv_k, "NetVLAD clusters");
  auto* tv_pooled_opt =
      tv->add_option("--pooled-dim", tv_pooled, "NetVLAD output width");
  auto* tv_fused_opt = tv->add_option("--fused-dim", tv_fused, "Fused width");
  auto* tv_hidden_opt =
      tv->add_option("--hidden-dim", tv_hidden, "Exported embedding width");
  auto* tv_frames_opt =
      tv->add_option("--frames", tv_frames, "Subsampled frames per video");

  // export-video
  auto* ev = app.add_subcommand(
      "export-video", "Export video_theme tracks from a trained model");
  std::string ev_manifest, ev_checkpoint, ev_out_manifest;
  ev->add_option("--manifest", ev_manifest, "Dataset manifest")->required();
  ev->add_option("--checkpoint", ev_checkpoint, "Video model checkpoint")
      ->required();
  ev->add_option("--out-manifest", ev_out_manifest,
                 "Updated manifest path (default: manifest_exported.json "
                 "next to the dataset)");

  // predict
  auto* predict = app.add_subcommand("predict", "Write per-frame predictions");
  std::string pr_manifest, pr_checkpoint, pr_split = "validation", pr_out;
  predict->add_option("--manifest", pr_manifest, "Dataset manifest")
      ->required();
  predict->add_option("--checkpoint", pr_checkpoint, "Frame model checkpoint")
      ->required();
  predict->add_option("--split", pr_split, "train|validation|test")
      ->check(CLI::IsMember({"train", "validation", "test"}));
  predict->add_option("--out", pr_out, "Prediction directory")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "Score predictions against labels");
  std::string eval_manifest, eval_pred, eval_split = "validation",
              eval_json, eval_csv;
  eval->add_option("--manifest", eval_manifest, "Dataset manifest")
      ->required();
  eval->add_option("--pred", eval_pred, "Prediction directory")->required();
  eval->add_option("--split", eval_split, "train|validation|test")
      ->check(CLI::IsMember({"train", "validation", "test"}));
  eval->add_option("--out", eval_json, "Report JSON path");
  eval->add_option("--csv", eval_csv, "Per-expression CSV path");

  // ensemble
  auto* ens = app.add_subcommand("ensemble",
                                 "Average several prediction sets");
  std::vector<std::string> ens_preds;
  std::string ens_out;
  ens->add_option("--pred", ens_preds, "Prediction directory (repeatable)")
      ->required();
  ens->add_option("--out", ens_out, "Output prediction directory")
      ->required();

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck",
                                "Finite-difference gradient checks");
  double gc_tol = 1e-4;
  gc->add_option("--tolerance", gc_tol, "Max relative error");

  // ablate
  auto* ablate = app.add_subcommand(
      "ablate", "Run the modality ladder (and optional method comparison)");
  std::string ab_manifest, ab_run;
  TrainFlags ab_flags;
  uint64_t ab_seed_base = 1;
  int ab_seeds = 5, ab_trials = 5;
  bool ab_methods = false;
  ablate->add_option("--manifest", ab_manifest, "Dataset manifest")
      ->required();
  ablate->add_option("--run-dir", ab_run, "Run directory")->required();
  ablate->add_option("--seed-base", ab_seed_base, "First seed of the sweep");
  ablate->add_option("--seeds", ab_seeds, "Seeds per rung");
  ablate->add_flag("--methods", ab_methods,
                   "Also compare MLP / MOE / MAF+MOE / ensemble");
  ablate->add_option("--trials", ab_trials, "Ensemble trials (with --methods)");
  ab_flags.attach(ablate, "small");

  try {
    app.parse(argc, argv);

    if (*synth)
      return cmd_synth(synth_out, synth_preset, synth_spec, synth_seed_opt,
                       synth_seed, synth_videos_opt, synth_videos,
                       synth_frames_opt, synth_frames, synth_noise_opt,
                       synth_noise, synth_tracknoise_opt, synth_tracknoise);
    if (*train) return cmd_train(train_manifest, train_run, train_flags);
    if (*tv)
      return cmd_train_video(tv_manifest, tv_run, tv_preset, tv_config,
                             tv_seed_opt, tv_seed, tv_lr_opt, tv_lr,
                             tv_epochs_opt, tv_epochs, tv_batch_opt, tv_batch,
                             tv_k_opt, tv_k, tv_pooled_opt, tv_pooled,
                             tv_fused_opt, tv_fused, tv_hidden_opt, tv_hidden,
                             tv_frames_opt, tv_frames);
    if (*ev) return cmd_export_video(ev_manifest, ev_checkpoint,
                                     ev_out_manifest);
    if (*predict)
      return cmd_predict(pr_manifest, pr_checkpoint, pr_split, pr_out);
    if (*eval)
      return cmd_eval(eval_manifest, eval_pred, eval_split, eval_json,
                      eval_csv);
    if (*ens) return cmd_ensemble(ens_preds, ens_out);
    if (*gc) return cmd_gradcheck(gc_tol);
    if (*ablate)
      return cmd_ablate(ab_manifest, ab_run, ab_flags, ab_seed_base, ab_seeds,
                        ab_methods, ab_trials);
    return kExitUsage;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << json{{"error",
                       {{"code", kExitUsage},
                        {"kind", "usage"},
                        {"message", e.what()}}}}
                     .dump()
              << "\n";
    return kExitUsage;
  } catch (const mgn::IoError& e) {
    std::cerr << json{{"error",
                       {{"code", kExitMissingInput},
                        {"kind", "missing_input"},
                        {"message", e.what()}}}}
                     .dump()
              << "\n";
    return kExitMissingInput;
  } catch (const mgn::NumericalError& e) {
    std::cerr << json{{"error",
                       {{"code", kExitNumerical},
                        {"kind", "numerical"},
                        {"message", e.what()}}}}
                     .dump()
              << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << json{{"error",
                       {{"code", 1},
                        {"kind", "error"},
                        {"message", e.what()}}}}
                     .dump()
              << "\n";
    return 1;
  }
}
