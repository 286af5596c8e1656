#include "fdct/cli.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>

#include <CLI11.hpp>

#include "fdct/checkpoint.hpp"
#include "fdct/data.hpp"
#include "fdct/image_io.hpp"
#include "fdct/metrics.hpp"

namespace fs = std::filesystem;

namespace fdct {

std::pair<int, int> parse_size(const std::string& text) {
  const auto x = text.find('x');
  int h = 0, w = 0;
  try {
    if (x == std::string::npos) throw std::invalid_argument(text);
    size_t end_h = 0, end_w = 0;
    h = std::stoi(text.substr(0, x), &end_h);
    w = std::stoi(text.substr(x + 1), &end_w);
    if (end_h != x || end_w != text.size() - x - 1) throw std::invalid_argument(text);
  } catch (const std::exception&) {
    throw ConfigError("size '" + text + "' is not of the form HxW");
  }
  if (h < 16 || w < 16 || h % 16 != 0 || w % 16 != 0) {
    throw ConfigError("size " + text + " must have both sides positive multiples of 16");
  }
  return {h, w};
}

void apply_flat_config(const nlohmann::json& flat, ResolvedConfig& cfg) {
  if (!flat.is_object()) throw ConfigError("config file must hold a JSON object");
  const auto keys_of = [](const nlohmann::json& j) {
    std::set<std::string> keys;
    for (const auto& [k, v] : j.items()) keys.insert(k);
    return keys;
  };
  const auto model_keys = keys_of(nlohmann::json(FdctConfig{}));
  const auto loss_keys = keys_of(nlohmann::json(LossConfig{}));
  const auto train_keys = keys_of(nlohmann::json(TrainConfig{}));
  nlohmann::json model = nlohmann::json::object(), loss = nlohmann::json::object(), train = nlohmann::json::object();
  for (const auto& [key, value] : flat.items()) {
    if (model_keys.count(key)) model[key] = value;
    else if (loss_keys.count(key)) loss[key] = value;
    else if (train_keys.count(key)) train[key] = value;
    else throw ConfigError("unknown config key '" + key + "'");
  }
  try {
    from_json(model, cfg.model);
    from_json(loss, cfg.loss);
    from_json(train, cfg.train);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config value has the wrong type: ") + e.what());
  }
}

nlohmann::json to_flat_json(const ResolvedConfig& cfg) {
  nlohmann::json flat = cfg.model;
  flat.update(nlohmann::json(cfg.loss));
  flat.update(nlohmann::json(cfg.train));
  return flat;
}

ResolvedConfig read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  ResolvedConfig cfg;
  apply_flat_config(j, cfg);
  return cfg;
}

namespace {

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory '" + dir.string() + "'");
}

/// Model-architecture flags shared by train, param-count and ablate.
struct ModelFlags {
  bool slim = false;
  std::string downsample;
  std::string fusion;
  bool no_fusion_branch = false;
  bool no_shortcuts = false;

  void add_to(CLI::App& app) {
    app.add_flag("--slim", slim, "Use the slim preset (C=32, 4 OSA layers of 16 channels)");
    app.add_option("--downsample", downsample, "Encoder downsampling: max, avg or conv")
        ->check(CLI::IsMember({"max", "avg", "conv", "max_pool", "avg_pool", "strided_conv"}));
    app.add_option("--fusion", fusion, "Raw-depth fusion: conv or concat")
        ->check(CLI::IsMember({"conv", "concat", "conv_fuse"}));
    app.add_flag("--no-fusion-branch", no_fusion_branch, "Disable the SFM fusion branch");
    app.add_flag("--no-shortcuts", no_shortcuts, "Disable cross-layer shortcuts");
  }

  void apply(FdctConfig& c) const {
    if (slim) {
      const FdctConfig s = FdctConfig::slim();
      c.channels = s.channels;
      c.osa_layers = s.osa_layers;
      c.osa_stage_channels = s.osa_stage_channels;
    }
    if (!downsample.empty()) c.downsample = parse_downsample(downsample);
    if (!fusion.empty()) c.depth_fusion = parse_depth_fusion(fusion);
    if (no_fusion_branch) c.use_fusion_branch = false;
    if (no_shortcuts) c.use_cross_shortcuts = false;
  }
};

/// Schedule flags shared by train and ablate; unset flags keep config values.
struct ScheduleFlags {
  CLI::Option* epochs_opt = nullptr;
  CLI::Option* batch_opt = nullptr;
  CLI::Option* lr_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* milestones_opt = nullptr;
  CLI::Option* workers_opt = nullptr;
  int epochs = 40;
  int batch_size = 32;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::vector<int> milestones{5, 15, 25, 35};
  int workers = 1;

  void add_to(CLI::App& app) {
    epochs_opt = app.add_option("--epochs", epochs, "Training epochs");
    batch_opt = app.add_option("--batch-size", batch_size, "Batch size");
    lr_opt = app.add_option("--lr", lr, "Initial learning rate");
    seed_opt = app.add_option("--seed", seed, "Initialisation and shuffling seed");
    milestones_opt = app.add_option("--milestones", milestones, "Epochs at whose start the rate is halved");
    workers_opt = app.add_option("--workers", workers, "Data decoding threads")->check(CLI::PositiveNumber);
  }

  void apply(TrainConfig& t, std::ostream& out) const {
    if (epochs_opt->count()) t.epochs = epochs;
    if (batch_opt->count()) t.batch_size = batch_size;
    if (lr_opt->count()) t.initial_lr = lr;
    if (seed_opt->count()) t.seed = seed;
    if (workers_opt->count()) t.workers = workers;
    if (milestones_opt->count()) {
      t.milestones = milestones;
    } else {
      std::vector<int> kept;
      for (int m : t.milestones) {
        if (m < t.epochs) kept.push_back(m);
      }
      if (kept.size() != t.milestones.size()) {
        out << "note: dropping learning-rate milestones >= " << t.epochs << " epochs\n";
        t.milestones = kept;
      }
    }
  }
};

void print_warnings(const DatasetIndex& index, std::ostream& err) {
  for (const auto& w : index.warnings) err << "warning: " << w << '\n';
  if (!index.warnings.empty()) err << "warning: " << index.warnings.size() << " frame(s) skipped\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Depth completion for transparent objects: data generation, training and evaluation", "fdct"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_version_flag("--version", "fdct 1.0");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic transparent-scene dataset");
  std::string gen_out;
  int gen_scenes = 10;
  std::string gen_size = "240x320";
  SynthSceneSpec gen_spec;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--scenes", gen_scenes, "Number of scenes")->check(CLI::NonNegativeNumber);
  gen->add_option("--size", gen_size, "Image size HxW (multiples of 16)");
  gen->add_option("--seed", gen_spec.seed, "Seed of the first scene; scene i uses seed + i");
  gen->add_option("--base-depth", gen_spec.base_depth, "Background plane depth in meters");
  gen->add_option("--bumps", gen_spec.n_bumps, "Smooth bumps per scene");
  gen->add_option("--regions", gen_spec.n_transparent_regions, "Transparent regions per scene");
  gen->add_option("--dropout", gen_spec.dropout_prob, "Probability of a missing reading inside the mask");
  gen->add_option("--noise", gen_spec.noise_std, "Std of raw-depth noise inside the mask (m)");
  gen->add_option("--offset", gen_spec.region_offset, "Maximum per-region raw-depth offset (m)");

  // train
  auto* train = app.add_subcommand("train", "Train a network on a dataset directory");
  std::string train_config, train_data, train_val, train_out, train_size = "240x320", train_resume;
  long train_max_steps = -1;
  int train_eval_every = 1;
  bool train_edge = false;
  ModelFlags train_model;
  ScheduleFlags train_sched;
  train->add_option("--config", train_config, "Flat JSON config file (flags override it)");
  train->add_option("--data", train_data, "Dataset root (uses <root>/train when present)")->required();
  train->add_option("--val", train_val, "Validation dataset root (default: <data>/val when present)");
  train->add_option("--out", train_out, "Output directory for checkpoints and logs")->required();
  train->add_option("--size", train_size, "Training resolution HxW");
  train->add_option("--resume", train_resume, "Continue from a checkpoint written by a previous run");
  auto* eval_every_opt = train->add_option("--eval-every", train_eval_every, "Validation interval in epochs");
  train->add_option("--max-steps", train_max_steps, "Stop after this many optimizer steps (-1: no limit)");
  auto* edge_opt = train->add_flag("--edge-weighting", train_edge, "Weight the Huber term by inverse edge strength");
  train_model.add_to(*train);
  train_sched.add_to(*train);

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  std::string eval_ckpt, eval_data, eval_report, eval_csv, eval_size = "240x320", eval_split = "test";
  bool eval_gt = false, eval_raw = false;
  int eval_workers = 1;
  eval->add_option("--checkpoint", eval_ckpt, "Checkpoint file");
  eval->add_option("--data", eval_data, "Dataset root (uses <root>/<split> when present)")->required();
  eval->add_option("--split", eval_split, "Dataset split")->check(CLI::IsMember({"train", "val", "test"}));
  eval->add_option("--report", eval_report, "Output JSON report")->required();
  eval->add_option("--csv", eval_csv, "Per-sample CSV (default: report path with .csv)");
  eval->add_option("--size", eval_size, "Evaluation resolution HxW");
  eval->add_flag("--gt-as-prediction", eval_gt, "Debug: score the ground truth against itself");
  eval->add_flag("--copy-raw", eval_raw, "Score the raw sensor depth (baseline)");
  eval->add_option("--workers", eval_workers, "Data decoding threads")->check(CLI::PositiveNumber);

  // predict
  auto* predict = app.add_subcommand("predict", "Complete the depth of one RGB-D frame");
  std::string pred_ckpt, pred_rgb, pred_depth, pred_out, pred_size, pred_vis;
  predict->add_option("--checkpoint", pred_ckpt, "Checkpoint file")->required();
  predict->add_option("--rgb", pred_rgb, "RGB PNG")->required();
  predict->add_option("--depth", pred_depth, "Raw depth PNG (16-bit millimetres)")->required();
  predict->add_option("--out", pred_out, "Output depth PNG (16-bit millimetres)")->required();
  predict->add_option("--size", pred_size, "Network resolution HxW (default: input size)");
  predict->add_option("--vis", pred_vis, "Optional side-by-side raw | completed visualisation PNG");

  // param-count
  auto* params = app.add_subcommand("param-count", "Print the exact parameter count and per-block breakdown");
  std::string params_config;
  bool params_json = false;
  ModelFlags params_model;
  params->add_option("--config", params_config, "Flat JSON config file");
  params->add_flag("--json", params_json, "Print JSON instead of a table");
  params_model.add_to(*params);

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Train and compare a grid of architecture or loss variants");
  std::string abl_grid = "downsample", abl_config, abl_data, abl_val, abl_out, abl_size = "240x320";
  int abl_synthetic = 0;
  ModelFlags abl_model;
  ScheduleFlags abl_sched;
  ablate->add_option("--grid", abl_grid, "Grid: downsample, fusion, components, edge or none")
      ->check(CLI::IsMember({"downsample", "fusion", "components", "edge", "none"}));
  ablate->add_option("--config", abl_config, "Flat JSON config file (flags override it)");
  ablate->add_option("--data", abl_data, "Training dataset root");
  ablate->add_option("--val", abl_val, "Validation dataset root (default: <data>/val)");
  ablate->add_option("--synthetic", abl_synthetic, "Use N generated training scenes and N/4 validation scenes");
  ablate->add_option("--out", abl_out, "Output directory for the table");
  ablate->add_option("--size", abl_size, "Training resolution HxW");
  abl_model.add_to(*ablate);
  abl_sched.add_to(*ablate);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kExitOk;
    }
    err << "error: " << e.what() << "\nRun with --help for usage.\n";
    return kExitUsage;
  }

  try {
    if (gen->parsed()) {
      const auto [h, w] = parse_size(gen_size);
      gen_spec.height = h;
      gen_spec.width = w;
      gen_spec.validate();
      const fs::path root(gen_out);
      ensure_dir(root);
      for (int i = 0; i < gen_scenes; ++i) {
        SynthSceneSpec spec = gen_spec;
        spec.seed = gen_spec.seed + static_cast<std::uint64_t>(i);
        char scene[32];
        std::snprintf(scene, sizeof scene, "scene_%04d", i);
        write_sample(root, scene, "0000", generate_scene(spec));
      }
      nlohmann::json manifest = gen_spec;
      manifest["scenes"] = gen_scenes;
      manifest["layout"] = "<scene>/{rgb,depth,depth_gt,mask}/<frame>.png";
      manifest["depth_unit"] = "millimetre";
      write_json(root / "spec.json", manifest);
      out << "wrote " << gen_scenes << " scene(s) to " << root.string() << '\n';
      return kExitOk;
    }

    if (params->parsed()) {
      ResolvedConfig cfg;
      if (!params_config.empty()) cfg = read_config_file(params_config);
      params_model.apply(cfg.model);
      cfg.model.validate();
      const FdctNetwork<float> net(cfg.model);
      const auto blocks = net.parameter_breakdown();
      if (params_json) {
        nlohmann::json j{{"config", cfg.model}, {"total", net.parameter_count()}};
        for (const auto& [name, n] : blocks) j["blocks"][name] = n;
        out << j.dump(2) << '\n';
      } else {
        char buf[96];
        for (const auto& [name, n] : blocks) {
          std::snprintf(buf, sizeof buf, "%-12s %10ld\n", name.c_str(), n);
          out << buf;
        }
        std::snprintf(buf, sizeof buf, "%-12s %10ld  (%.3fM)\n", "total", net.parameter_count(),
                      net.parameter_count() / 1e6);
        out << buf;
      }
      return kExitOk;
    }

    if (train->parsed()) {
      const auto [h, w] = parse_size(train_size);
      std::unique_ptr<Trainer> trainer;
      ResolvedConfig cfg;
      if (!train_resume.empty()) {
        trainer = std::make_unique<Trainer>(Trainer::load(train_resume));
        cfg = {trainer->model_config(), trainer->loss_config(), trainer->train_config()};
      } else {
        if (!train_config.empty()) cfg = read_config_file(train_config);
        train_model.apply(cfg.model);
        train_sched.apply(cfg.train, out);
        if (eval_every_opt->count()) cfg.train.eval_every = train_eval_every;
        if (edge_opt->count()) cfg.loss.edge_weighting = train_edge;
        trainer = std::make_unique<Trainer>(cfg.model, cfg.loss, cfg.train);
      }

      DatasetIndex train_index = load_dataset(train_data, Split::train);
      print_warnings(train_index, err);
      DiskSource train_disk(std::move(train_index), h, w);
      InMemorySource train_src(load_samples(train_disk, cfg.train.workers));
      std::unique_ptr<InMemorySource> val_src;
      const fs::path val_root = !train_val.empty() ? fs::path(train_val)
                                : fs::is_directory(fs::path(train_data) / "val") ? fs::path(train_data) / "val"
                                                                                  : fs::path();
      if (!val_root.empty()) {
        DatasetIndex val_index = load_dataset(val_root, Split::val);
        print_warnings(val_index, err);
        val_src = std::make_unique<InMemorySource>(load_samples(DiskSource(std::move(val_index), h, w), cfg.train.workers));
      }

      const fs::path out_dir(train_out);
      ensure_dir(out_dir);
      nlohmann::json resolved = to_flat_json(cfg);
      write_json(out_dir / "config.json", resolved);
      write_json(out_dir / "run.json", {{"data", train_data},
                                         {"val", val_root.string()},
                                         {"size", train_size},
                                         {"train_samples", train_src.size()},
                                         {"val_samples", val_src ? val_src->size() : 0},
                                         {"parameter_count", trainer->network().parameter_count()},
                                         {"resize", {{"rgb", "bilinear"}, {"depth", "nearest"}, {"mask", "nearest"}}}});
      out << "training " << trainer->network().parameter_count() << " parameters on " << train_src.size()
          << " samples at " << train_size << '\n';
      FitOptions opts;
      opts.out_dir = out_dir;
      opts.max_steps = train_max_steps;
      opts.on_epoch = [&](const EpochRecord& r) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "epoch %d/%d  lr %.3g  loss %.6f", r.epoch + 1, cfg.train.epochs, r.lr,
                      r.train_loss);
        out << buf;
        if (r.val) {
          std::snprintf(buf, sizeof buf, "  val_rmse %.5f", r.val->rmse);
          out << buf;
        }
        out << std::endl;
      };
      const TrainState& state = trainer->fit(train_src, val_src.get(), opts);
      out << "finished at epoch " << state.epoch << ", step " << state.step;
      if (state.best_epoch >= 0) out << ", best val RMSE " << state.best_rmse << " (epoch " << state.best_epoch + 1 << ")";
      out << '\n';
      return kExitOk;
    }

    if (eval->parsed()) {
      const auto [h, w] = parse_size(eval_size);
      if (eval_ckpt.empty() && !eval_gt && !eval_raw) {
        err << "error: --checkpoint is required unless --gt-as-prediction or --copy-raw is given\n";
        return kExitUsage;
      }
      std::optional<FdctNetwork<float>> net;
      std::optional<Checkpoint> ckpt;
      if (!eval_gt && !eval_raw) {
        try {
          ckpt = load_checkpoint(eval_ckpt);
          net.emplace(network_from_checkpoint(*ckpt));
        } catch (const ConfigError& e) {
          err << "error: " << e.what() << '\n';
          return kExitFailure;
        }
      }
      DatasetIndex index = load_dataset(eval_data, parse_split(eval_split));
      print_warnings(index, err);
      const ValidRange range = ckpt ? ckpt->range : ValidRange{};
      DiskSource source(std::move(index), h, w);
      InMemorySource samples(load_samples(source, eval_workers));
      const EvalResult result = eval_gt    ? evaluate_ground_truth(samples, range)
                                : eval_raw ? evaluate_copy_raw(samples, range)
                                           : evaluate(*net, samples, range);
      nlohmann::json report{{"metrics", result.pooled},
                            {"source", eval_gt ? "ground_truth" : eval_raw ? "copy_raw" : "checkpoint"},
                            {"checkpoint", eval_ckpt},
                            {"data", eval_data},
                            {"split", eval_split},
                            {"size", eval_size},
                            {"valid_range", {range.lo, range.hi}}};
      write_json(eval_report, report);
      fs::path csv = eval_csv.empty() ? fs::path(eval_report).replace_extension(".csv") : fs::path(eval_csv);
      write_per_sample_csv(csv, result);
      out << metrics_table_header() << '\n'
          << metrics_table_row(eval_gt ? "ground-truth" : eval_raw ? "copy-raw" : "FDCT", result.pooled) << '\n';
      return kExitOk;
    }

    if (predict->parsed()) {
      Checkpoint ckpt = load_checkpoint(pred_ckpt);
      FdctNetwork<float> net = [&] {
        try {
          return network_from_checkpoint(ckpt);
        } catch (const ConfigError& e) {
          throw IoError(e.what());
        }
      }();
      RgbImage rgb = rgb_from_png(read_png(pred_rgb));
      DepthMap raw = depth_from_png(read_png(pred_depth));
      const int src_h = raw.height(), src_w = raw.width();
      if (rgb.height() != src_h || rgb.width() != src_w) throw InputError("rgb and depth sizes differ");
      int h = src_h, w = src_w;
      if (!pred_size.empty()) std::tie(h, w) = parse_size(pred_size);
      if (h != src_h || w != src_w) {
        for (auto& c : rgb.channels) c = resize_bilinear(c, h, w);
        raw.values = resize_nearest(raw.values, h, w);
      }
      DepthMap completed = clamp_prediction(net.predict(rgb, raw), ckpt.model.depth_max);
      if (h != src_h || w != src_w) completed.values = resize_nearest(completed.values, src_h, src_w);
      write_png(pred_out, depth_to_png(completed));
      if (!pred_vis.empty()) {
        const DepthMap raw_src = depth_from_png(read_png(pred_depth));
        PngImage vis{2 * src_w, src_h, 1, 8, {}};
        vis.samples.resize(static_cast<size_t>(2 * src_w) * src_h);
        const double hi = std::max(completed.values.maxCoeff(), raw_src.values.maxCoeff());
        for (int y = 0; y < src_h; ++y) {
          for (int x = 0; x < src_w; ++x) {
            auto gray = [&](double d) { return static_cast<std::uint16_t>(hi > 0 ? std::lround(255.0 * d / hi) : 0); };
            vis.samples[static_cast<size_t>(y) * 2 * src_w + x] = gray(raw_src(y, x));
            vis.samples[static_cast<size_t>(y) * 2 * src_w + src_w + x] = gray(completed(y, x));
          }
        }
        write_png(pred_vis, vis);
      }
      out << "wrote " << pred_out << '\n';
      return kExitOk;
    }

    if (ablate->parsed()) {
      const auto [h, w] = parse_size(abl_size);
      ResolvedConfig cfg;
      if (!abl_config.empty()) cfg = read_config_file(abl_config);
      abl_model.apply(cfg.model);
      abl_sched.apply(cfg.train, out);
      cfg.model.validate();
      cfg.train.validate();
      const auto grid = ablation_grid(abl_grid, cfg.model, cfg.loss);

      std::vector<AblationRow> rows;
      if (!grid.empty()) {
        std::unique_ptr<InMemorySource> train_src, val_src;
        if (abl_synthetic > 0) {
          SynthSceneSpec spec;
          spec.height = h;
          spec.width = w;
          spec.seed = cfg.train.seed * 100003 + 1;
          train_src = std::make_unique<InMemorySource>(generate_scenes(spec, abl_synthetic));
          spec.seed += static_cast<std::uint64_t>(abl_synthetic);
          val_src = std::make_unique<InMemorySource>(generate_scenes(spec, std::max(1, abl_synthetic / 4)));
        } else {
          if (abl_data.empty()) {
            err << "error: ablate needs --data or --synthetic\n";
            return kExitUsage;
          }
          DatasetIndex ti = load_dataset(abl_data, Split::train);
          print_warnings(ti, err);
          train_src = std::make_unique<InMemorySource>(load_samples(DiskSource(std::move(ti), h, w), cfg.train.workers));
          const fs::path vr = !abl_val.empty() ? fs::path(abl_val) : fs::path(abl_data) / "val";
          DatasetIndex vi = load_dataset(vr, Split::val);
          print_warnings(vi, err);
          val_src = std::make_unique<InMemorySource>(load_samples(DiskSource(std::move(vi), h, w), cfg.train.workers));
        }
        rows = run_ablation(grid, *train_src, *val_src, cfg.train);
      }
      const std::string table = ablation_table(rows);
      out << table;
      if (!abl_out.empty()) {
        const fs::path dir(abl_out);
        ensure_dir(dir);
        write_json(dir / "ablation.json", {{"grid", abl_grid}, {"config", to_flat_json(cfg)}, {"rows", rows}});
        std::ofstream txt(dir / "ablation.txt");
        txt << table;
        if (!txt) throw IoError("cannot write '" + (dir / "ablation.txt").string() + "'");
      }
      return kExitOk;
    }
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace fdct
