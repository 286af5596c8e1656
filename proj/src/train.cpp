#include "fdct/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fdct/checkpoint.hpp"

namespace fs = std::filesystem;

namespace fdct {

void TrainConfig::validate() const {
  if (!(initial_lr >= 0.0)) throw ConfigError("initial_lr must be non-negative");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  for (size_t i = 0; i < milestones.size(); ++i) {
    if (milestones[i] < 0 || milestones[i] >= epochs) {
      throw ConfigError("milestone " + std::to_string(milestones[i]) + " must lie in [0, epochs)");
    }
    if (i > 0 && milestones[i] <= milestones[i - 1]) throw ConfigError("milestones must be strictly increasing");
  }
  if (!(lr_factor > 0.0 && lr_factor < 1.0)) throw ConfigError("lr_factor must lie in (0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("betas must lie in [0, 1)");
  if (!(adam_epsilon > 0.0)) throw ConfigError("adam_epsilon must be positive");
  if (!(grad_clip >= 0.0)) throw ConfigError("grad_clip must be non-negative");
  if (eval_every < 1) throw ConfigError("eval_every must be at least 1");
  if (workers < 1) throw ConfigError("workers must be at least 1");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"initial_lr", c.initial_lr}, {"milestones", c.milestones}, {"lr_factor", c.lr_factor},
                     {"epochs", c.epochs},         {"batch_size", c.batch_size}, {"weight_decay", c.weight_decay},
                     {"beta1", c.beta1},           {"beta2", c.beta2},           {"adam_epsilon", c.adam_epsilon},
                     {"grad_clip", c.grad_clip},   {"seed", c.seed},             {"eval_every", c.eval_every},
                     {"workers", c.workers}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  for (const auto& [key, value] : j.items()) {
    if (key == "initial_lr") c.initial_lr = value.get<double>();
    else if (key == "milestones") c.milestones = value.get<std::vector<int>>();
    else if (key == "lr_factor") c.lr_factor = value.get<double>();
    else if (key == "epochs") c.epochs = value.get<int>();
    else if (key == "batch_size") c.batch_size = value.get<int>();
    else if (key == "weight_decay") c.weight_decay = value.get<double>();
    else if (key == "beta1") c.beta1 = value.get<double>();
    else if (key == "beta2") c.beta2 = value.get<double>();
    else if (key == "adam_epsilon") c.adam_epsilon = value.get<double>();
    else if (key == "grad_clip") c.grad_clip = value.get<double>();
    else if (key == "seed") c.seed = value.get<std::uint64_t>();
    else if (key == "eval_every") c.eval_every = value.get<int>();
    else if (key == "workers") c.workers = value.get<int>();
    else throw ConfigError("unknown train config key '" + key + "'");
  }
}

double lr_at(const TrainConfig& cfg, int epoch) {
  if (epoch < 0 || epoch >= cfg.epochs) {
    throw ConfigError("epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(cfg.epochs) + ")");
  }
  double lr = cfg.initial_lr;
  for (int m : cfg.milestones) {
    if (m <= epoch) lr *= cfg.lr_factor;
  }
  return lr;
}

template <typename Scalar>
AdamW<Scalar>::AdamW(const ParameterStore<Scalar>& params, double beta1, double beta2, double epsilon,
                     double weight_decay)
    : m(params.zeros_like()), v(params.zeros_like()), beta1_(beta1), beta2_(beta2), epsilon_(epsilon),
      weight_decay_(weight_decay) {}

template <typename Scalar>
void AdamW<Scalar>::step(ParameterStore<Scalar>& params, const GradientSet<Scalar>& grads, double lr) {
  if (static_cast<int>(grads.size()) != params.size() || static_cast<int>(m.size()) != params.size()) {
    throw DimensionError("optimizer state does not match the parameter store");
  }
  ++t;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t));
  const auto b1 = static_cast<Scalar>(beta1_), b2 = static_cast<Scalar>(beta2_);
  const auto step_size = static_cast<Scalar>(lr / bc1);
  const auto inv_sqrt_bc2 = static_cast<Scalar>(1.0 / std::sqrt(bc2));
  const auto eps = static_cast<Scalar>(epsilon_);
  const auto decay = static_cast<Scalar>(1.0 - lr * weight_decay_);
  for (int i = 0; i < params.size(); ++i) {
    auto p = params[i].value.array();
    const auto g = grads[static_cast<size_t>(i)].array();
    auto mi = m[static_cast<size_t>(i)].array();
    auto vi = v[static_cast<size_t>(i)].array();
    if (weight_decay_ != 0.0) p *= decay;
    mi = b1 * mi + (Scalar(1) - b1) * g;
    vi = b2 * vi + (Scalar(1) - b2) * g.square();
    p -= step_size * mi / (vi.sqrt() * inv_sqrt_bc2 + eps);
  }
}

template <typename Scalar>
double gradient_norm(const GradientSet<Scalar>& grads) {
  double sum = 0.0;
  for (const auto& g : grads) sum += g.template cast<double>().squaredNorm();
  return std::sqrt(sum);
}

namespace {

std::string batch_ids(const std::vector<Sample>& batch) {
  std::string out;
  for (const auto& s : batch) out += (out.empty() ? "" : ", ") + s.id;
  return "[" + out + "]";
}

void add_bundle(LossBundle& acc, const LossBundle& b) {
  acc.total += b.total;
  acc.huber += b.huber;
  acc.ssim_term += b.ssim_term;
  acc.smooth += b.smooth;
  acc.ssim += b.ssim;
  acc.valid_pixel_count += b.valid_pixel_count;
}

LossBundle mean_bundle(LossBundle acc, int n) {
  if (n == 0) return LossBundle{};
  const double inv = 1.0 / n;
  acc.total *= inv;
  acc.huber *= inv;
  acc.ssim_term *= inv;
  acc.smooth *= inv;
  acc.ssim *= inv;
  acc.active = true;
  return acc;
}

template <typename Scalar>
DepthMap prediction_meters(const FeatureMap<Scalar>& out, double depth_max) {
  return DepthMap(out.plane(0).template cast<double>() * depth_max);
}

}  // namespace

template <typename Scalar>
StepResult train_step(FdctNetwork<Scalar>& net, AdamW<Scalar>& opt, const std::vector<Sample>& batch,
                      const LossConfig& loss_cfg, const ValidRange& range, double lr, double grad_clip) {
  if (batch.empty()) throw ConfigError("train_step needs a non-empty batch");
  GradientSet<Scalar> grads = net.parameters().zeros_like();
  typename FdctNetwork<Scalar>::Tape tape;
  StepResult result;
  LossBundle acc{};
  acc.ssim = 0.0;
  for (const Sample& s : batch) {
    check_sample_shape(s);
    const auto out = net.forward(s.rgb, s.raw_depth, &tape);
    DepthMap grad;
    const LossBundle b =
        total_loss(prediction_meters(out, net.config().depth_max), s.gt_depth, s.mask, range, loss_cfg, &grad);
    if (!std::isfinite(b.total)) {
      throw TrainingError("non-finite loss on sample " + s.id + " of batch " + batch_ids(batch));
    }
    if (!b.active) continue;
    net.backward(tape, grad, grads);
    add_bundle(acc, b);
    ++result.active_samples;
  }
  result.loss = mean_bundle(acc, result.active_samples);
  if (result.active_samples == 0) return result;

  const auto inv = static_cast<Scalar>(1.0 / result.active_samples);
  for (auto& g : grads) g *= inv;
  result.grad_norm = gradient_norm(grads);
  if (!std::isfinite(result.grad_norm)) throw TrainingError("non-finite gradient on batch " + batch_ids(batch));
  if (grad_clip > 0.0 && result.grad_norm > grad_clip) {
    const auto scale = static_cast<Scalar>(grad_clip / result.grad_norm);
    for (auto& g : grads) g *= scale;
  }
  opt.step(net.parameters(), grads, lr);
  result.updated = true;
  return result;
}

template <typename Scalar>
LossBundle batch_loss(const FdctNetwork<Scalar>& net, const std::vector<Sample>& batch, const LossConfig& loss_cfg,
                      const ValidRange& range) {
  LossBundle acc{};
  acc.ssim = 0.0;
  int n = 0;
  for (const Sample& s : batch) {
    const auto out = net.forward(s.rgb, s.raw_depth);
    const LossBundle b = total_loss(prediction_meters(out, net.config().depth_max), s.gt_depth, s.mask, range, loss_cfg);
    if (!b.active) continue;
    add_bundle(acc, b);
    ++n;
  }
  return mean_bundle(acc, n);
}

namespace {

EvalResult finish(std::vector<SampleResult> per_sample) {
  std::vector<PixelStats> stats;
  for (const auto& r : per_sample) stats.push_back(r.stats);
  return {aggregate(stats), std::move(per_sample)};
}

}  // namespace

template <typename Scalar>
EvalResult evaluate(const FdctNetwork<Scalar>& net, const SampleSource& source, const ValidRange& range) {
  std::vector<SampleResult> rows;
  for (size_t i = 0; i < source.size(); ++i) {
    const Sample s = source.get(i);
    const DepthMap pred = clamp_prediction(net.predict(s.rgb, s.raw_depth), net.config().depth_max);
    rows.push_back({s.id, pixel_stats(pred, s.gt_depth, s.mask, range)});
  }
  return finish(std::move(rows));
}

EvalResult evaluate_copy_raw(const SampleSource& source, const ValidRange& range) {
  std::vector<SampleResult> rows;
  for (size_t i = 0; i < source.size(); ++i) {
    const Sample s = source.get(i);
    rows.push_back({s.id, pixel_stats(s.raw_depth, s.gt_depth, s.mask, range)});
  }
  return finish(std::move(rows));
}

EvalResult evaluate_ground_truth(const SampleSource& source, const ValidRange& range) {
  std::vector<SampleResult> rows;
  for (size_t i = 0; i < source.size(); ++i) {
    const Sample s = source.get(i);
    rows.push_back({s.id, pixel_stats(s.gt_depth, s.gt_depth, s.mask, range)});
  }
  return finish(std::move(rows));
}

void write_per_sample_csv(const fs::path& path, const EvalResult& result) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "id,pixel_count,rmse,rel,mae,delta_105,delta_110,delta_125\n";
  auto field = [](double v) {
    if (!std::isfinite(v)) return std::string();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return std::string(buf);
  };
  for (const auto& row : result.per_sample) {
    const MetricsReport r = report_from(row.stats, row.stats.count > 0);
    out << row.id << ',' << r.pixel_count << ',' << field(r.rmse) << ',' << field(r.rel) << ',' << field(r.mae)
        << ',' << field(r.delta_105) << ',' << field(r.delta_110) << ',' << field(r.delta_125) << '\n';
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void to_json(nlohmann::json& j, const EpochRecord& r) {
  j = nlohmann::json{{"epoch", r.epoch}, {"lr", r.lr}, {"train_loss", r.train_loss}, {"steps", r.steps}};
  j["val"] = r.val ? nlohmann::json(*r.val) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, EpochRecord& r) {
  r.epoch = j.at("epoch").get<int>();
  r.lr = j.at("lr").get<double>();
  r.train_loss = j.at("train_loss").get<double>();
  r.steps = j.at("steps").get<long>();
  if (j.contains("val") && !j.at("val").is_null()) r.val = j.at("val").get<MetricsReport>();
}

void to_json(nlohmann::json& j, const TrainState& s) {
  j = nlohmann::json{{"epoch", s.epoch},
                     {"batch_in_epoch", s.batch_in_epoch},
                     {"step", s.step},
                     {"epoch_loss_sum", s.epoch_loss_sum},
                     {"epoch_loss_count", s.epoch_loss_count},
                     {"best_rmse", std::isfinite(s.best_rmse) ? nlohmann::json(s.best_rmse) : nlohmann::json(nullptr)},
                     {"best_epoch", s.best_epoch},
                     {"history", s.history}};
}

void from_json(const nlohmann::json& j, TrainState& s) {
  s.epoch = j.at("epoch").get<int>();
  s.batch_in_epoch = j.at("batch_in_epoch").get<long>();
  s.step = j.at("step").get<long>();
  s.epoch_loss_sum = j.at("epoch_loss_sum").get<double>();
  s.epoch_loss_count = j.at("epoch_loss_count").get<long>();
  s.best_rmse = j.at("best_rmse").is_null() ? std::numeric_limits<double>::infinity()
                                            : j.at("best_rmse").get<double>();
  s.best_epoch = j.at("best_epoch").get<int>();
  s.history = j.at("history").get<std::vector<EpochRecord>>();
}

void to_json(nlohmann::json& j, const StepLog& s) {
  j = nlohmann::json{{"epoch", s.epoch},
                     {"step", s.step},
                     {"lr", s.lr},
                     {"total", s.loss.total},
                     {"huber", s.loss.huber},
                     {"ssim_term", s.loss.ssim_term},
                     {"smooth", s.loss.smooth},
                     {"ssim", s.loss.ssim},
                     {"valid_pixels", s.loss.valid_pixel_count},
                     {"grad_norm", s.grad_norm}};
}

Trainer::Trainer(const FdctConfig& model, const LossConfig& loss, const TrainConfig& train, const ValidRange& range)
    : model_(model), loss_(loss), train_(train), range_(range), net_((model.validate(), model), train.seed) {
  loss_.validate();
  train_.validate();
  range_.validate();
  opt_ = AdamW<float>(net_.parameters(), train_.beta1, train_.beta2, train_.adam_epsilon, train_.weight_decay);
}

const TrainState& Trainer::fit(const SampleSource& train, const SampleSource* val, const FitOptions& options) {
  if (train.size() == 0) throw DatasetError("training set is empty");
  std::ofstream log;
  if (!options.out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(options.out_dir, ec);
    if (ec) throw IoError("cannot create '" + options.out_dir.string() + "': " + ec.message());
    log.open(options.out_dir / "train_log.jsonl", std::ios::app);
    if (!log) throw IoError("cannot write the training log in '" + options.out_dir.string() + "'");
  }
  auto write_outputs = [&](bool improved) {
    if (options.out_dir.empty()) return;
    save(options.out_dir / "last.ckpt");
    if (improved) save(options.out_dir / "best.ckpt");
    std::ofstream h(options.out_dir / "history.json");
    h << nlohmann::json(state_.history).dump(2) << '\n';
    if (!h) throw IoError("cannot write history in '" + options.out_dir.string() + "'");
  };

  long steps_taken = 0;
  std::vector<Sample> batch;
  while (state_.epoch < train_.epochs) {
    const double lr = lr_at(train_, state_.epoch);
    BatchIterator batches(train, static_cast<size_t>(train_.batch_size), train_.seed, state_.epoch, train_.workers);
    batches.skip(static_cast<size_t>(state_.batch_in_epoch));
    while (batches.next(batch)) {
      if (options.max_steps >= 0 && steps_taken >= options.max_steps) {
        write_outputs(false);
        return state_;
      }
      StepResult r;
      try {
        r = train_step(net_, opt_, batch, loss_, range_, lr, train_.grad_clip);
      } catch (const TrainingError& e) {
        throw TrainingError("epoch " + std::to_string(state_.epoch) + ", step " + std::to_string(state_.step) +
                            ": " + e.what());
      }
      ++state_.batch_in_epoch;
      ++state_.step;
      ++steps_taken;
      if (r.updated) {
        state_.epoch_loss_sum += r.loss.total;
        ++state_.epoch_loss_count;
      }
      const StepLog entry{state_.epoch, state_.step, lr, r.loss, r.grad_norm};
      if (log.is_open()) log << nlohmann::json(entry).dump() << '\n' << std::flush;
      if (options.on_step) options.on_step(entry);
    }

    EpochRecord rec;
    rec.epoch = state_.epoch;
    rec.lr = lr;
    rec.steps = state_.batch_in_epoch;
    rec.train_loss = state_.epoch_loss_count > 0 ? state_.epoch_loss_sum / static_cast<double>(state_.epoch_loss_count)
                                                 : 0.0;
    const bool last = state_.epoch + 1 == train_.epochs;
    bool improved = false;
    if (val && val->size() > 0 && ((state_.epoch + 1) % train_.eval_every == 0 || last)) {
      rec.val = evaluate(net_, *val, range_).pooled;
      if (rec.val->defined() && rec.val->rmse < state_.best_rmse) {
        state_.best_rmse = rec.val->rmse;
        state_.best_epoch = state_.epoch;
        improved = true;
      }
    }
    state_.history.push_back(rec);
    ++state_.epoch;
    state_.batch_in_epoch = 0;
    state_.epoch_loss_sum = 0.0;
    state_.epoch_loss_count = 0;
    write_outputs(improved);
    if (options.on_epoch) options.on_epoch(rec);
  }
  return state_;
}

void Trainer::save(const fs::path& path) const {
  Checkpoint ckpt;
  ckpt.model = net_.config();
  ckpt.loss = loss_;
  ckpt.train = train_;
  ckpt.range = range_;
  ckpt.state = state_;
  ckpt.parameters = export_parameters(net_.parameters());
  ckpt.adam_t = opt_.t;
  ckpt.adam_m = opt_.m;
  ckpt.adam_v = opt_.v;
  save_checkpoint(path, ckpt);
}

Trainer Trainer::load(const fs::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  Trainer t(ckpt.model, ckpt.loss, ckpt.train, ckpt.range);
  import_parameters(ckpt, t.net_);
  if (ckpt.has_optimizer()) {
    if (ckpt.adam_m.size() != t.opt_.m.size()) throw ConfigError("checkpoint optimizer state is incomplete");
    t.opt_.t = ckpt.adam_t;
    t.opt_.m = std::move(ckpt.adam_m);
    t.opt_.v = std::move(ckpt.adam_v);
  }
  t.state_ = std::move(ckpt.state);
  return t;
}

std::vector<AblationVariant> ablation_grid(const std::string& name, const FdctConfig& base, const LossConfig& loss) {
  std::vector<AblationVariant> grid;
  if (name == "downsample") {
    for (auto mode : {DownsampleMode::max_pool, DownsampleMode::avg_pool, DownsampleMode::strided_conv}) {
      FdctConfig c = base;
      c.downsample = mode;
      grid.push_back({to_string(mode), c, loss});
    }
  } else if (name == "fusion") {
    for (auto mode : {DepthFusionMode::conv_fuse, DepthFusionMode::concat}) {
      FdctConfig c = base;
      c.depth_fusion = mode;
      grid.push_back({to_string(mode), c, loss});
    }
  } else if (name == "components") {
    FdctConfig c = base;
    grid.push_back({"full", c, loss});
    c.use_cross_shortcuts = false;
    grid.push_back({"-shortcuts", c, loss});
    c.use_fusion_branch = false;
    grid.push_back({"-fusion_branch", c, loss});
    c.depth_fusion = DepthFusionMode::concat;
    grid.push_back({"-depth_conv", c, loss});
  } else if (name == "edge") {
    LossConfig l = loss;
    l.edge_weighting = false;
    grid.push_back({"plain_huber", base, l});
    l.edge_weighting = true;
    grid.push_back({"edge_huber", base, l});
  } else if (name != "none") {
    throw ConfigError("unknown ablation grid '" + name + "'");
  }
  return grid;
}

std::vector<AblationRow> run_ablation(const std::vector<AblationVariant>& grid, const SampleSource& train,
                                      const SampleSource& val, const TrainConfig& train_cfg, const ValidRange& range) {
  std::vector<AblationRow> rows;
  for (const auto& v : grid) {
    AblationRow row;
    row.label = v.label;
    row.model = v.model;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      Trainer trainer(v.model, v.loss, train_cfg, range);
      row.parameter_count = trainer.network().parameter_count();
      trainer.fit(train, nullptr);
      row.metrics = evaluate(trainer.network(), val, range).pooled;
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-16s %10s %s %9s\n", "Variant", "Params(M)", metrics_table_header().substr(17).c_str(),
                "Time(s)");
  out << buf;
  for (const auto& r : rows) {
    if (r.ok) {
      std::snprintf(buf, sizeof buf, "%-16s %10.4f %s %9.1f\n", r.label.c_str(), r.parameter_count / 1e6,
                    metrics_table_row("", r.metrics).substr(17).c_str(), r.seconds);
    } else {
      std::snprintf(buf, sizeof buf, "%-16s %10.4f FAILED: %s\n", r.label.c_str(), r.parameter_count / 1e6,
                    r.error.c_str());
    }
    out << buf;
  }
  return out.str();
}

void to_json(nlohmann::json& j, const AblationRow& r) {
  j = nlohmann::json{{"label", r.label},     {"model", r.model},   {"parameter_count", r.parameter_count},
                     {"ok", r.ok},           {"error", r.error},   {"metrics", r.metrics},
                     {"seconds", r.seconds}};
}

template class AdamW<float>;
template class AdamW<double>;
template double gradient_norm(const GradientSet<float>&);
template double gradient_norm(const GradientSet<double>&);
template StepResult train_step(FdctNetwork<float>&, AdamW<float>&, const std::vector<Sample>&, const LossConfig&,
                               const ValidRange&, double, double);
template StepResult train_step(FdctNetwork<double>&, AdamW<double>&, const std::vector<Sample>&, const LossConfig&,
                               const ValidRange&, double, double);
template LossBundle batch_loss(const FdctNetwork<float>&, const std::vector<Sample>&, const LossConfig&,
                               const ValidRange&);
template LossBundle batch_loss(const FdctNetwork<double>&, const std::vector<Sample>&, const LossConfig&,
                               const ValidRange&);
template EvalResult evaluate(const FdctNetwork<float>&, const SampleSource&, const ValidRange&);
template EvalResult evaluate(const FdctNetwork<double>&, const SampleSource&, const ValidRange&);

}  // namespace fdct
