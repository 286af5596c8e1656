#include "fdct/data.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numbers>
#include <numeric>
#include <random>

#include "fdct/image_io.hpp"

namespace fs = std::filesystem;

namespace fdct {

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw ConfigError("unknown split '" + s + "'");
}

namespace {

std::vector<fs::path> sorted_children(const fs::path& dir, bool directories) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (directories ? e.is_directory() : e.is_regular_file()) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

DatasetIndex load_dataset(const fs::path& root, Split split) {
  if (!fs::is_directory(root)) throw IoError("dataset directory '" + root.string() + "' does not exist");
  DatasetIndex index;
  index.split = split;
  index.root = fs::is_directory(root / to_string(split)) ? root / to_string(split) : root;

  for (const fs::path& scene : sorted_children(index.root, true)) {
    const fs::path rgb_dir = scene / "rgb";
    if (!fs::is_directory(rgb_dir)) continue;
    for (const fs::path& rgb : sorted_children(rgb_dir, false)) {
      if (rgb.extension() != ".png") continue;
      DatasetEntry e;
      e.id = scene.filename().string() + "/" + rgb.stem().string();
      e.rgb = rgb;
      e.raw_depth = scene / "depth" / rgb.filename();
      e.gt_depth = scene / "depth_gt" / rgb.filename();
      e.mask = scene / "mask" / rgb.filename();

      std::string problem;
      for (const fs::path* p : {&e.raw_depth, &e.gt_depth, &e.mask}) {
        if (!fs::is_regular_file(*p)) {
          problem = "missing file " + p->string();
          break;
        }
      }
      if (problem.empty()) {
        try {
          const PngInfo ri = read_png_info(e.rgb), di = read_png_info(e.raw_depth), gi = read_png_info(e.gt_depth),
                        mi = read_png_info(e.mask);
          const bool same = ri.width == di.width && ri.width == gi.width && ri.width == mi.width &&
                            ri.height == di.height && ri.height == gi.height && ri.height == mi.height;
          if (!same) problem = "inconsistent image sizes for " + e.rgb.string();
          else if (di.channels != 1 || gi.channels != 1) problem = "depth is not single-channel for " + e.rgb.string();
        } catch (const IoError& err) {
          problem = err.what();
        }
      }
      if (problem.empty()) index.entries.push_back(std::move(e));
      else index.warnings.push_back("skipped " + e.id + ": " + problem);
    }
  }
  std::sort(index.entries.begin(), index.entries.end(),
            [](const DatasetEntry& a, const DatasetEntry& b) { return a.id < b.id; });
  if (index.entries.empty()) throw DatasetError("no usable frames under '" + index.root.string() + "'");
  return index;
}

Sample get_sample(const DatasetIndex& index, size_t i, int height, int width) {
  if (i >= index.size()) throw DatasetError("sample index " + std::to_string(i) + " out of range");
  const DatasetEntry& e = index.entries[i];
  Sample s;
  s.id = e.id;
  s.rgb = rgb_from_png(read_png(e.rgb));
  s.raw_depth = depth_from_png(read_png(e.raw_depth));
  s.gt_depth = depth_from_png(read_png(e.gt_depth));
  s.mask = mask_from_png(read_png(e.mask));
  check_sample_shape(s);
  if (height > 0 && width > 0) {
    for (auto& c : s.rgb.channels) c = resize_bilinear(c, height, width);
    s.raw_depth.values = resize_nearest(s.raw_depth.values, height, width);
    s.gt_depth.values = resize_nearest(s.gt_depth.values, height, width);
    s.mask.values = resize_nearest(s.mask.values, height, width);
  }
  return s;
}

void write_sample(const fs::path& root, const std::string& scene, const std::string& frame, const Sample& sample) {
  const fs::path base = root / scene;
  for (const char* sub : {"rgb", "depth", "depth_gt", "mask"}) {
    std::error_code ec;
    fs::create_directories(base / sub, ec);
    if (ec) throw IoError("cannot create '" + (base / sub).string() + "': " + ec.message());
  }
  const std::string file = frame + ".png";
  write_png(base / "rgb" / file, rgb_to_png(sample.rgb));
  write_png(base / "depth" / file, depth_to_png(sample.raw_depth));
  write_png(base / "depth_gt" / file, depth_to_png(sample.gt_depth));
  write_png(base / "mask" / file, mask_to_png(sample.mask));
}

void SynthSceneSpec::validate() const {
  if (height < 16 || width < 16 || height % 16 != 0 || width % 16 != 0) {
    throw ConfigError("scene size " + std::to_string(height) + "x" + std::to_string(width) +
                      " must be at least 16 and divisible by 16");
  }
  if (!(dropout_prob >= 0.0 && dropout_prob <= 1.0)) throw ConfigError("dropout_prob must lie in [0, 1]");
  if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be non-negative");
  if (!(region_offset >= 0.0)) throw ConfigError("region_offset must be non-negative");
  if (n_bumps < 0 || n_transparent_regions < 0) throw ConfigError("scene element counts must be non-negative");
  if (!(base_depth > 0.0)) throw ConfigError("base_depth must be positive");
}

void to_json(nlohmann::json& j, const SynthSceneSpec& s) {
  j = nlohmann::json{{"height", s.height},
                     {"width", s.width},
                     {"base_depth", s.base_depth},
                     {"n_bumps", s.n_bumps},
                     {"n_transparent_regions", s.n_transparent_regions},
                     {"dropout_prob", s.dropout_prob},
                     {"noise_std", s.noise_std},
                     {"region_offset", s.region_offset},
                     {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, SynthSceneSpec& s) {
  s.height = j.value("height", s.height);
  s.width = j.value("width", s.width);
  s.base_depth = j.value("base_depth", s.base_depth);
  s.n_bumps = j.value("n_bumps", s.n_bumps);
  s.n_transparent_regions = j.value("n_transparent_regions", s.n_transparent_regions);
  s.dropout_prob = j.value("dropout_prob", s.dropout_prob);
  s.noise_std = j.value("noise_std", s.noise_std);
  s.region_offset = j.value("region_offset", s.region_offset);
  s.seed = j.value("seed", s.seed);
}

Sample generate_scene(const SynthSceneSpec& spec) {
  spec.validate();
  const int h = spec.height, w = spec.width;
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  const double extent = std::min(h, w);

  Sample s;
  s.id = "synth_" + std::to_string(spec.seed);

  // Ground truth: tilted plane plus Gaussian bumps.
  const double tilt_x = uniform(-0.1, 0.1) / w, tilt_y = uniform(-0.1, 0.1) / h;
  s.gt_depth = DepthMap(h, w, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) s.gt_depth(y, x) = spec.base_depth + tilt_x * (x - w / 2.0) + tilt_y * (y - h / 2.0);
  }
  for (int b = 0; b < spec.n_bumps; ++b) {
    const double cx = uniform(0, w), cy = uniform(0, h);
    const double r = uniform(0.1, 0.3) * extent, amp = uniform(-0.2, 0.2);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        s.gt_depth(y, x) += amp * std::exp(-d2 / (2 * r * r));
      }
    }
  }
  s.gt_depth.values = s.gt_depth.values.max(0.35).min(1.45);

  // Transparent regions: rotated ellipses; later regions win on overlap.
  struct Ellipse {
    double cx, cy, ax, ay, cos_t, sin_t, offset;
  };
  std::vector<Ellipse> regions;
  for (int r = 0; r < spec.n_transparent_regions; ++r) {
    const double theta = uniform(0, std::numbers::pi);
    Ellipse e{uniform(0.2, 0.8) * w, uniform(0.2, 0.8) * h, uniform(0.08, 0.22) * w, uniform(0.08, 0.22) * h,
              std::cos(theta), std::sin(theta), uniform(0.5, 1.0) * spec.region_offset};
    regions.push_back(e);
  }
  ImagePlane<int> region_id = ImagePlane<int>::Constant(h, w, -1);
  ImagePlane<double> radius = ImagePlane<double>::Constant(h, w, 2.0);
  for (size_t r = 0; r < regions.size(); ++r) {
    const Ellipse& e = regions[r];
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double dx = x - e.cx, dy = y - e.cy;
        const double u = (dx * e.cos_t + dy * e.sin_t) / e.ax, v = (-dx * e.sin_t + dy * e.cos_t) / e.ay;
        const double rr = std::sqrt(u * u + v * v);
        if (rr <= 1.0) {
          region_id(y, x) = static_cast<int>(r);
          radius(y, x) = rr;
        }
      }
    }
  }
  s.mask = TransparentMask(region_id >= 0);

  // RGB: Lambertian shading of an exaggerated relief, per-scene albedo,
  // lighter tint inside transparent regions and bright rims at their edges.
  const NormalMap normals = normals_from_depth(DepthMap(s.gt_depth.values * 40.0));
  const Eigen::Vector3d light = Eigen::Vector3d(0.4, -0.4, 0.82).normalized();
  std::array<double, 3> albedo{uniform(0.3, 0.7), uniform(0.3, 0.7), uniform(0.3, 0.7)};
  const double stripe = uniform(0.05, 0.2);
  s.rgb = RgbImage(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double lambert = normals.components[0](y, x) * light.x() + normals.components[1](y, x) * light.y() +
                             normals.components[2](y, x) * light.z();
      const double shade = 0.35 + 0.65 * std::max(0.0, lambert);
      const double texture = 1.0 + 0.1 * std::sin(stripe * (x + 0.5 * y));
      for (int c = 0; c < 3; ++c) {
        double v = albedo[static_cast<size_t>(c)] * shade * texture;
        if (region_id(y, x) >= 0) {
          v = 0.6 * v + 0.4 * 0.85;
          if (radius(y, x) > 0.88) v = 0.97;
        }
        s.rgb.channels[static_cast<size_t>(c)](y, x) = std::clamp(v, 0.0, 1.0);
      }
    }
  }

  // Raw sensor depth: corrupted inside the transparent regions only.
  std::normal_distribution<double> normal(0.0, 1.0);
  s.raw_depth = s.gt_depth;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int r = region_id(y, x);
      if (r < 0) continue;
      const double noise = normal(rng) * spec.noise_std;
      const bool drop = unit(rng) < spec.dropout_prob;
      if (drop) {
        s.raw_depth(y, x) = 0.0;
      } else if (spec.noise_std > 0.0 || regions[static_cast<size_t>(r)].offset > 0.0) {
        s.raw_depth(y, x) = std::max(0.0, s.gt_depth(y, x) + regions[static_cast<size_t>(r)].offset + noise);
      }
    }
  }
  return s;
}

std::vector<Sample> generate_scenes(const SynthSceneSpec& base, int count) {
  std::vector<Sample> out;
  out.reserve(static_cast<size_t>(std::max(0, count)));
  for (int i = 0; i < count; ++i) {
    SynthSceneSpec spec = base;
    spec.seed = base.seed + static_cast<std::uint64_t>(i);
    out.push_back(generate_scene(spec));
  }
  return out;
}

std::vector<Sample> load_samples(const SampleSource& source, int workers) {
  std::vector<Sample> out(source.size());
  const size_t nworkers = std::min(static_cast<size_t>(std::max(1, workers)), std::max<size_t>(1, out.size()));
  if (nworkers == 1) {
    for (size_t i = 0; i < out.size(); ++i) out[i] = source.get(i);
    return out;
  }
  std::vector<std::future<void>> jobs;
  for (size_t t = 0; t < nworkers; ++t) {
    jobs.push_back(std::async(std::launch::async, [&, t] {
      for (size_t i = t; i < out.size(); i += nworkers) out[i] = source.get(i);
    }));
  }
  for (auto& j : jobs) j.get();
  return out;
}

std::vector<std::vector<size_t>> epoch_batches(size_t n, size_t batch_size, std::uint64_t shuffle_seed, int epoch) {
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::seed_seq seq{static_cast<std::uint32_t>(shuffle_seed), static_cast<std::uint32_t>(shuffle_seed >> 32),
                    static_cast<std::uint32_t>(epoch)};
  std::mt19937_64 rng(seq);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<size_t>> batches;
  for (size_t i = 0; i < n; i += batch_size) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch_size)));
  }
  return batches;
}

BatchIterator::BatchIterator(const SampleSource& source, size_t batch_size, std::uint64_t shuffle_seed, int epoch,
                             int workers)
    : source_(source), batches_(epoch_batches(source.size(), batch_size, shuffle_seed, epoch)),
      workers_(std::max(1, workers)) {}

bool BatchIterator::next(std::vector<Sample>& batch) {
  if (cursor_ >= batches_.size()) return false;
  const auto& ids = batches_[cursor_++];
  batch.clear();
  batch.resize(ids.size());
  if (workers_ == 1 || ids.size() == 1) {
    for (size_t i = 0; i < ids.size(); ++i) batch[i] = source_.get(ids[i]);
    return true;
  }
  // Strided assignment: worker t decodes items t, t + workers, ...
  std::vector<std::future<void>> jobs;
  const size_t nworkers = std::min(static_cast<size_t>(workers_), ids.size());
  for (size_t t = 0; t < nworkers; ++t) {
    jobs.push_back(std::async(std::launch::async, [&, t] {
      for (size_t i = t; i < ids.size(); i += nworkers) batch[i] = source_.get(ids[i]);
    }));
  }
  for (auto& j : jobs) j.get();
  return true;
}

}  // namespace fdct
