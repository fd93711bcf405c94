#include "dio/serialization.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "json_io.hpp"

namespace dio {

namespace {

using detail::json;

constexpr std::array<char, 8> kCkptMagic{'D', 'I', 'O', 'C', 'K', 'P', 'T', '\0'};
constexpr std::array<char, 8> kTensorMagic{'D', 'I', 'O', 'T', 'E', 'N', 'S', '\0'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(const std::string& in, std::size_t off) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= std::uint64_t{static_cast<unsigned char>(in[off + static_cast<std::size_t>(i)])} << (8 * i);
  return v;
}

void put_doubles(std::string& out, std::span<const double> values) {
  for (double d : values) put_u64(out, std::bit_cast<std::uint64_t>(d));
}

void write_framed(const std::filesystem::path& path, const std::array<char, 8>& magic,
                  const json& manifest, const std::vector<Tensor>& tensors) {
  std::string bytes(magic.begin(), magic.end());
  const std::string m = manifest.dump();
  put_u64(bytes, m.size());
  bytes += m;
  for (const auto& t : tensors) put_doubles(bytes, t.data());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("write failed for " + path.string());
}

struct Framed {
  json manifest;
  std::string blob;
};

Framed read_framed(const std::filesystem::path& path, const std::array<char, 8>& magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (bytes.size() < 16 || std::memcmp(bytes.data(), magic.data(), 8) != 0)
    throw CheckpointError(path.string() + ": bad magic");
  const std::uint64_t mlen = get_u64(bytes, 8);
  if (bytes.size() - 16 < mlen) throw CheckpointError(path.string() + ": truncated manifest");
  Framed f;
  try {
    f.manifest = json::parse(bytes.substr(16, mlen));
  } catch (const json::exception& e) {
    throw CheckpointError(path.string() + ": bad manifest: " + e.what());
  }
  f.blob = bytes.substr(16 + mlen);
  return f;
}

void read_doubles(const std::string& blob, std::size_t& off, std::span<double> dst) {
  for (double& d : dst) {
    d = std::bit_cast<double>(get_u64(blob, off));
    off += 8;
  }
}

std::vector<std::string> parameter_names(const DioModel& model) {
  std::vector<std::string> names;
  std::size_t li = 0;
  for (const auto& layer : model.backbone().layers()) {
    if (std::holds_alternative<DenseLayer>(layer) || std::holds_alternative<ConvLayer>(layer)) {
      names.push_back("backbone." + std::to_string(li) + ".weight");
      names.push_back("backbone." + std::to_string(li) + ".bias");
    }
    ++li;
  }
  for (std::size_t h = 0; h < model.num_heads(); ++h) {
    names.push_back("head." + std::to_string(h) + ".weight");
    names.push_back("head." + std::to_string(h) + ".bias");
  }
  return names;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const DioModel& model,
                     const CheckpointMeta& meta) {
  const auto params = model.parameters();
  const auto names = parameter_names(model);
  json plist = json::array();
  std::size_t total = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    plist.push_back({{"name", names.at(i)}, {"shape", params[i].shape()}});
    total += params[i].size();
  }
  json metrics = json::object();
  for (const auto& [k, v] : meta.metrics) metrics[k] = detail::number(v);
  json manifest = {{"format_version", kCheckpointVersion},
                   {"arch", detail::to_json(model.arch())},
                   {"heads", model.num_heads()},
                   {"parameters", plist},
                   {"total_parameters", total},
                   {"tag", meta.tag},
                   {"seed", meta.seed},
                   {"epoch", meta.epoch},
                   {"metrics", metrics},
                   {"checksum", model.checksum()}};
  if (!meta.config_json.empty()) manifest["config"] = json::parse(meta.config_json);
  write_framed(path, kCkptMagic, manifest, params);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Framed f = read_framed(path, kCkptMagic);
  const json& m = f.manifest;
  const std::string where = path.string();
  try {
    if (!m.contains("format_version")) throw CheckpointError(where + ": manifest has no format_version");
    if (m.at("format_version").get<int>() != kCheckpointVersion)
      throw CheckpointError(where + ": unsupported format_version " + m.at("format_version").dump());
    const ArchSpec arch = detail::arch_from_json(m.at("arch"), "arch");
    const std::size_t total = m.at("total_parameters").get<std::size_t>();
    if (f.blob.size() != total * 8)
      throw CheckpointError(where + ": weight blob has " + std::to_string(f.blob.size()) +
                            " bytes, manifest declares " + std::to_string(total * 8));

    Checkpoint ck;
    ck.model = make_model(arch, 0);
    auto params = ck.model.parameters();
    const json& plist = m.at("parameters");
    if (plist.size() != params.size())
      throw CheckpointError(where + ": parameter count does not match the architecture");
    std::size_t off = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const Shape shape = plist[i].at("shape").get<Shape>();
      if (shape != params[i].shape())
        throw CheckpointError(where + ": parameter " + plist[i].at("name").get<std::string>() +
                              " has shape " + to_string(shape) + ", expected " +
                              to_string(params[i].shape()));
      read_doubles(f.blob, off, params[i].data());
    }
    ck.meta.tag = m.value("tag", "");
    ck.meta.seed = m.value("seed", std::uint64_t{0});
    ck.meta.epoch = m.value("epoch", std::size_t{0});
    if (m.contains("metrics"))
      for (const auto& [k, v] : m.at("metrics").items())
        ck.meta.metrics[k] = v.is_number() ? v.get<double>() : std::numeric_limits<double>::quiet_NaN();
    if (m.contains("config")) ck.meta.config_json = m.at("config").dump(2);
    return ck;
  } catch (const json::exception& e) {
    throw CheckpointError(where + ": malformed manifest: " + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(where + ": " + e.what());
  }
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  write_framed(path, kTensorMagic, json{{"format_version", kCheckpointVersion}, {"shape", t.shape()}}, {t});
}

Tensor load_tensor(const std::filesystem::path& path) {
  Framed f = read_framed(path, kTensorMagic);
  try {
    Tensor t(f.manifest.at("shape").get<Shape>());
    if (f.blob.size() != t.size() * 8) throw CheckpointError(path.string() + ": blob length mismatch");
    std::size_t off = 0;
    read_doubles(f.blob, off, t.data());
    return t;
  } catch (const json::exception& e) {
    throw CheckpointError(path.string() + ": malformed manifest: " + e.what());
  }
}

}  // namespace dio
