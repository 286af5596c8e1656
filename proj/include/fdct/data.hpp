#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "fdct/core.hpp"

namespace fdct {

enum class Split { train, val, test };
std::string to_string(Split s);
Split parse_split(const std::string& s);

/// File quadruple for one frame: <scene>/{rgb,depth,depth_gt,mask}/NNNN.png.
struct DatasetEntry {
  std::string id;  // "<scene>/<frame>"
  std::filesystem::path rgb;
  std::filesystem::path raw_depth;
  std::filesystem::path gt_depth;
  std::filesystem::path mask;
};

struct DatasetIndex {
  std::filesystem::path root;
  Split split = Split::train;
  std::vector<DatasetEntry> entries;
  /// One message per skipped frame (incomplete or undecodable).
  std::vector<std::string> warnings;

  size_t size() const { return entries.size(); }
};

/// Scans `root/<split>` if that directory exists, otherwise `root` itself.
/// Entries are sorted lexicographically by id. Throws IoError when the
/// directory is missing and DatasetError when no frame is usable.
DatasetIndex load_dataset(const std::filesystem::path& root, Split split);

/// Decodes entry `i` and resizes to height x width (0 keeps the source
/// size): RGB bilinear, depth and mask nearest-neighbour. Depth is
/// converted from millimetres to meters.
Sample get_sample(const DatasetIndex& index, size_t i, int height = 0, int width = 0);

/// Writes a sample in the dataset layout under root/<scene>/.../<frame>.png.
void write_sample(const std::filesystem::path& root, const std::string& scene, const std::string& frame,
                  const Sample& sample);

/// Parameters of a procedurally generated transparent scene.
struct SynthSceneSpec {
  int height = 240;
  int width = 320;
  double base_depth = 0.9;
  int n_bumps = 4;
  int n_transparent_regions = 2;
  double dropout_prob = 0.3;
  double noise_std = 0.01;
  /// Upper bound of the per-region constant offset added to raw depth.
  double region_offset = 0.08;
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const SynthSceneSpec& s);
void from_json(const nlohmann::json& j, SynthSceneSpec& s);

/// gt: base plane plus smooth radial bumps, clipped into [0.35, 1.45] m.
/// mask: union of random ellipses. raw: gt with, inside the mask, a constant
/// offset per region, Gaussian noise and random dropout to 0. rgb: shaded
/// rendering of gt with tinted regions and bright region rims.
Sample generate_scene(const SynthSceneSpec& spec);

/// Random-access sample provider.
class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual size_t size() const = 0;
  virtual Sample get(size_t i) const = 0;
};

class InMemorySource : public SampleSource {
 public:
  explicit InMemorySource(std::vector<Sample> samples) : samples_(std::move(samples)) {}
  size_t size() const override { return samples_.size(); }
  Sample get(size_t i) const override { return samples_.at(i); }
  const std::vector<Sample>& samples() const { return samples_; }

 private:
  std::vector<Sample> samples_;
};

class DiskSource : public SampleSource {
 public:
  DiskSource(DatasetIndex index, int height, int width)
      : index_(std::move(index)), height_(height), width_(width) {}
  size_t size() const override { return index_.size(); }
  Sample get(size_t i) const override { return get_sample(index_, i, height_, width_); }
  const DatasetIndex& index() const { return index_; }

 private:
  DatasetIndex index_;
  int height_, width_;
};

/// `count` scenes from `base` with seeds base.seed, base.seed + 1, ...
std::vector<Sample> generate_scenes(const SynthSceneSpec& base, int count);

/// Every sample of `source` in index order, decoded with up to `workers` threads.
std::vector<Sample> load_samples(const SampleSource& source, int workers = 1);

/// Index batches for one epoch. The permutation depends only on
/// (shuffle_seed, epoch); the last batch may be partial.
std::vector<std::vector<size_t>> epoch_batches(size_t n, size_t batch_size, std::uint64_t shuffle_seed, int epoch);

/// Streams the batches of one epoch, decoding with up to `workers` threads.
class BatchIterator {
 public:
  BatchIterator(const SampleSource& source, size_t batch_size, std::uint64_t shuffle_seed, int epoch,
                int workers = 1);

  size_t batch_count() const { return batches_.size(); }
  /// Index batches of this epoch, in emission order.
  const std::vector<std::vector<size_t>>& plan() const { return batches_; }
  /// Fills `batch` with the next batch; false once the epoch is exhausted.
  bool next(std::vector<Sample>& batch);
  /// Skips the first `n` batches (used when resuming mid-epoch).
  void skip(size_t n) { cursor_ = std::min(batches_.size(), cursor_ + n); }

 private:
  const SampleSource& source_;
  std::vector<std::vector<size_t>> batches_;
  size_t cursor_ = 0;
  int workers_ = 1;
};

}  // namespace fdct
