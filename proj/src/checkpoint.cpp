#include "fdct/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

namespace fdct {

namespace {

constexpr char kMagic[8] = {'F', 'D', 'C', 'T', 'C', 'K', 'P', 'T'};

void write_array(std::ofstream& out, const Matrix<float>& m) {
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float)));
}

void read_array(std::ifstream& in, Matrix<float>& m, const std::filesystem::path& path) {
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float)));
  if (!in) throw IoError("checkpoint '" + path.string() + "' is truncated");
}

template <typename T>
void write_pod(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_pod(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw IoError("checkpoint '" + path.string() + "' is truncated");
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::json shapes = nlohmann::json::array();
  for (const auto& p : ckpt.parameters) {
    shapes.push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});
  }
  const nlohmann::json header{{"format_version", kCheckpointVersion},
                              {"scalar", "float32"},
                              {"model", ckpt.model},
                              {"loss", ckpt.loss},
                              {"train", ckpt.train},
                              {"valid_range", {{"lo", ckpt.range.lo}, {"hi", ckpt.range.hi}}},
                              {"state", ckpt.state},
                              {"parameters", shapes},
                              {"optimizer", {{"present", ckpt.has_optimizer()}, {"t", ckpt.adam_t}}}};
  const std::string text = header.dump();

  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
    out.write(kMagic, sizeof kMagic);
    write_pod<std::uint32_t>(out, kCheckpointVersion);
    write_pod<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& p : ckpt.parameters) write_array(out, p.value);
    if (ckpt.has_optimizer()) {
      for (const auto& m : ckpt.adam_m) write_array(out, m);
      for (const auto& v : ckpt.adam_v) write_array(out, v);
    }
    if (!out) throw IoError("failed writing checkpoint '" + path.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at '" + path.string() + "': " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw IoError("'" + path.string() + "' is not a checkpoint file");
  }
  const auto version = read_pod<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw IoError("checkpoint '" + path.string() + "' has unsupported version " + std::to_string(version));
  }
  const auto length = read_pod<std::uint64_t>(in, path);
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  if (!in) throw IoError("checkpoint '" + path.string() + "' is truncated");

  Checkpoint ckpt;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
    ckpt.model = header.at("model").get<FdctConfig>();
    ckpt.loss = header.at("loss").get<LossConfig>();
    ckpt.train = header.at("train").get<TrainConfig>();
    ckpt.range.lo = header.at("valid_range").at("lo").get<double>();
    ckpt.range.hi = header.at("valid_range").at("hi").get<double>();
    ckpt.state = header.at("state").get<TrainState>();
    ckpt.adam_t = header.at("optimizer").at("t").get<long>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint '" + path.string() + "' has a malformed header: " + e.what());
  }
  for (const auto& s : header.at("parameters")) {
    NamedArray a{s.at("name").get<std::string>(),
                 Matrix<float>(s.at("rows").get<Eigen::Index>(), s.at("cols").get<Eigen::Index>())};
    read_array(in, a.value, path);
    ckpt.parameters.push_back(std::move(a));
  }
  if (header.at("optimizer").at("present").get<bool>()) {
    for (auto* moments : {&ckpt.adam_m, &ckpt.adam_v}) {
      for (const auto& p : ckpt.parameters) {
        Matrix<float> m(p.value.rows(), p.value.cols());
        read_array(in, m, path);
        moments->push_back(std::move(m));
      }
    }
  }
  return ckpt;
}

std::vector<NamedArray> export_parameters(const ParameterStore<float>& params) {
  std::vector<NamedArray> out;
  for (const auto& p : params) out.push_back({p.name, p.value});
  return out;
}

void import_parameters(const Checkpoint& ckpt, FdctNetwork<float>& net) {
  if (!(ckpt.model == net.config())) {
    throw ConfigError("checkpoint model config " + nlohmann::json(ckpt.model).dump() +
                      " does not match the requested config " + nlohmann::json(net.config()).dump());
  }
  std::map<std::string, const NamedArray*> by_name;
  for (const auto& a : ckpt.parameters) by_name[a.name] = &a;
  auto& store = net.parameters();
  for (auto& p : store) {
    const auto it = by_name.find(p.name);
    if (it == by_name.end()) throw ConfigError("checkpoint lacks parameter '" + p.name + "'");
    const Matrix<float>& v = it->second->value;
    if (v.rows() != p.value.rows() || v.cols() != p.value.cols()) {
      throw ConfigError("checkpoint parameter '" + p.name + "' has the wrong shape");
    }
    p.value = v;
    by_name.erase(it);
  }
  if (!by_name.empty()) throw ConfigError("checkpoint has unexpected parameter '" + by_name.begin()->first + "'");
}

FdctNetwork<float> network_from_checkpoint(const Checkpoint& ckpt) {
  FdctNetwork<float> net(ckpt.model);
  import_parameters(ckpt, net);
  return net;
}

}  // namespace fdct
