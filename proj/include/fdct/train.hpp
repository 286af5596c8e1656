#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fdct/config.hpp"
#include "fdct/data.hpp"
#include "fdct/losses.hpp"
#include "fdct/metrics.hpp"
#include "fdct/network.hpp"

namespace fdct {

struct TrainConfig {
  double initial_lr = 1e-3;
  /// Epoch indices (0-based) from whose start the rate is multiplied by lr_factor.
  std::vector<int> milestones{5, 15, 25, 35};
  double lr_factor = 0.5;
  int epochs = 40;
  int batch_size = 32;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  /// Global gradient-norm clip; 0 disables clipping.
  double grad_clip = 0.0;
  std::uint64_t seed = 0;
  int eval_every = 1;
  int workers = 1;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
/// Missing keys keep their defaults; unknown keys raise ConfigError.
void from_json(const nlohmann::json& j, TrainConfig& c);

/// initial_lr * lr_factor^(number of milestones <= epoch).
double lr_at(const TrainConfig& cfg, int epoch);

/// Adam with decoupled weight decay: p <- p * (1 - lr * wd), then the
/// bias-corrected Adam update.
template <typename Scalar>
class AdamW {
 public:
  AdamW() = default;
  AdamW(const ParameterStore<Scalar>& params, double beta1, double beta2, double epsilon, double weight_decay);

  void step(ParameterStore<Scalar>& params, const GradientSet<Scalar>& grads, double lr);

  long t = 0;
  std::vector<Matrix<Scalar>> m, v;

 private:
  double beta1_ = 0.9, beta2_ = 0.999, epsilon_ = 1e-8, weight_decay_ = 0.0;
};

template <typename Scalar>
double gradient_norm(const GradientSet<Scalar>& grads);

struct StepResult {
  /// Mean of the per-sample bundles over samples with a non-empty valid set.
  LossBundle loss;
  double grad_norm = 0.0;
  int active_samples = 0;
  /// False when no sample in the batch had valid pixels; parameters unchanged.
  bool updated = false;
};

/// One forward/backward pass over `batch` and one optimizer update.
/// Throws TrainingError, naming the batch ids, on a non-finite loss or gradient.
template <typename Scalar>
StepResult train_step(FdctNetwork<Scalar>& net, AdamW<Scalar>& opt, const std::vector<Sample>& batch,
                      const LossConfig& loss_cfg, const ValidRange& range, double lr, double grad_clip = 0.0);

/// Loss bundle of the current parameters on `batch`, without an update.
template <typename Scalar>
LossBundle batch_loss(const FdctNetwork<Scalar>& net, const std::vector<Sample>& batch, const LossConfig& loss_cfg,
                      const ValidRange& range);

struct SampleResult {
  std::string id;
  PixelStats stats;
};

struct EvalResult {
  MetricsReport pooled;
  std::vector<SampleResult> per_sample;
};

/// Pixel-pooled metrics of the clamped network prediction over `source`.
template <typename Scalar>
EvalResult evaluate(const FdctNetwork<Scalar>& net, const SampleSource& source, const ValidRange& range);

/// Metrics of the raw sensor depth (or the ground truth itself) used as the prediction.
EvalResult evaluate_copy_raw(const SampleSource& source, const ValidRange& range);
EvalResult evaluate_ground_truth(const SampleSource& source, const ValidRange& range);

/// Writes "id,pixel_count,rmse,rel,mae,delta_105,delta_110,delta_125".
void write_per_sample_csv(const std::filesystem::path& path, const EvalResult& result);

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  long steps = 0;
  std::optional<MetricsReport> val;
};

void to_json(nlohmann::json& j, const EpochRecord& r);
void from_json(const nlohmann::json& j, EpochRecord& r);

/// Position in the training run. Batch order is a function of
/// (seed, epoch) alone, so (epoch, batch_in_epoch) fully determines the
/// data stream on resume.
struct TrainState {
  int epoch = 0;
  long batch_in_epoch = 0;
  long step = 0;
  double epoch_loss_sum = 0.0;
  long epoch_loss_count = 0;
  double best_rmse = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  std::vector<EpochRecord> history;
};

void to_json(nlohmann::json& j, const TrainState& s);
void from_json(const nlohmann::json& j, TrainState& s);

struct StepLog {
  int epoch = 0;
  long step = 0;
  double lr = 0.0;
  LossBundle loss;
  double grad_norm = 0.0;
};

void to_json(nlohmann::json& j, const StepLog& s);

struct FitOptions {
  /// Checkpoints, history and step log go here; empty disables file output.
  std::filesystem::path out_dir;
  /// Stop after this many optimizer steps in this call (negative: no limit).
  long max_steps = -1;
  std::function<void(const StepLog&)> on_step;
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Owns a float network, its optimizer and the run position.
class Trainer {
 public:
  Trainer(const FdctConfig& model, const LossConfig& loss, const TrainConfig& train, const ValidRange& range = {});

  FdctNetwork<float>& network() { return net_; }
  const FdctNetwork<float>& network() const { return net_; }
  const AdamW<float>& optimizer() const { return opt_; }
  AdamW<float>& optimizer() { return opt_; }
  const TrainState& state() const { return state_; }
  TrainState& state() { return state_; }
  const FdctConfig& model_config() const { return net_.config(); }
  const LossConfig& loss_config() const { return loss_; }
  const TrainConfig& train_config() const { return train_; }
  const ValidRange& range() const { return range_; }

  /// Runs from the current state until all epochs are done (or max_steps).
  /// Evaluates on `val` every eval_every epochs and after the last one.
  const TrainState& fit(const SampleSource& train, const SampleSource* val, const FitOptions& options = {});

  void save(const std::filesystem::path& path) const;
  /// Restores parameters, optimizer moments and run position.
  static Trainer load(const std::filesystem::path& path);

 private:
  FdctConfig model_;
  LossConfig loss_;
  TrainConfig train_;
  ValidRange range_;
  FdctNetwork<float> net_;
  AdamW<float> opt_;
  TrainState state_;
};

struct AblationVariant {
  std::string label;
  FdctConfig model;
  LossConfig loss;
};

struct AblationRow {
  std::string label;
  FdctConfig model;
  long parameter_count = 0;
  bool ok = false;
  std::string error;
  MetricsReport metrics;
  double seconds = 0.0;
};

/// Named grids: "downsample" (max/avg/conv), "fusion" (conv_fuse/concat),
/// "components" (full model, then fusion branch, shortcuts and raw-depth
/// fusion progressively removed), "edge" (plain vs edge-weighted Huber).
std::vector<AblationVariant> ablation_grid(const std::string& name, const FdctConfig& base, const LossConfig& loss);

/// Trains every variant from the same seed on the same data; a failing
/// variant is recorded with its error and the grid continues.
std::vector<AblationRow> run_ablation(const std::vector<AblationVariant>& grid, const SampleSource& train,
                                      const SampleSource& val, const TrainConfig& train_cfg,
                                      const ValidRange& range = {});

std::string ablation_table(const std::vector<AblationRow>& rows);
void to_json(nlohmann::json& j, const AblationRow& r);

}  // namespace fdct
