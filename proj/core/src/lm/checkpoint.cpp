#include "othello/lm/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>
#include <zlib.h>

namespace othello::lm {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(std::string_view bytes, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + static_cast<std::size_t>(i)]))
         << (8 * i);
  }
  return v;
}

std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

[[noreturn]] void corrupt(const std::string& why) {
  throw Error(ErrorCode::kCorruptCheckpoint, why);
}

}  // namespace

std::string serialize_checkpoint(const Model<float>& model) {
  const ModelConfig& cfg = model.config();
  nlohmann::ordered_json j;
  j["format_version"] = kCheckpointFormatVersion;
  j["layers"] = cfg.layers;
  j["heads"] = cfg.heads;
  j["dim"] = cfg.dim;
  j["context"] = cfg.context;
  j["vocab"] = cfg.vocab;
  j["seed"] = cfg.seed;
  j["parameters"] = cfg.parameter_count();
  const std::string config = j.dump();

  std::string out(kCheckpointMagic);
  put_u32(out, static_cast<std::uint32_t>(config.size()));
  out += config;
  const auto params = model.parameters();
  out.reserve(out.size() + params.size() * 4 + 4);
  for (float f : params) put_u32(out, std::bit_cast<std::uint32_t>(f));
  put_u32(out, crc32_of(out));
  return out;
}

Model<float> deserialize_checkpoint(std::string_view bytes) {
  const std::size_t magic = kCheckpointMagic.size();
  if (bytes.size() < magic + 8 || bytes.substr(0, magic) != kCheckpointMagic) {
    corrupt("bad magic bytes");
  }
  const std::uint32_t stored_crc = get_u32(bytes, bytes.size() - 4);
  if (crc32_of(bytes.substr(0, bytes.size() - 4)) != stored_crc) {
    corrupt("CRC mismatch (truncated or damaged file)");
  }
  const std::uint32_t config_len = get_u32(bytes, magic);
  if (magic + 4 + config_len + 4 > bytes.size()) corrupt("config length exceeds file");

  ModelConfig cfg;
  try {
    const auto j = nlohmann::json::parse(bytes.substr(magic + 4, config_len));
    if (j.at("format_version").get<int>() != kCheckpointFormatVersion) {
      corrupt("unsupported format version");
    }
    cfg.layers = j.at("layers").get<int>();
    cfg.heads = j.at("heads").get<int>();
    cfg.dim = j.at("dim").get<int>();
    cfg.context = j.at("context").get<int>();
    cfg.vocab = j.at("vocab").get<int>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.validate();
  } catch (const nlohmann::json::exception& e) {
    corrupt(std::string("unreadable config: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kCorruptCheckpoint) throw;
    corrupt(std::string("invalid config: ") + e.what());
  }

  const std::size_t data_begin = magic + 4 + config_len;
  const std::size_t n = cfg.parameter_count();
  if (bytes.size() - data_begin - 4 != n * 4) {
    corrupt("parameter block has the wrong size for its config");
  }
  std::vector<float> params(n);
  for (std::size_t i = 0; i < n; ++i) {
    params[i] = std::bit_cast<float>(get_u32(bytes, data_begin + 4 * i));
    if (!std::isfinite(params[i])) corrupt("non-finite parameter");
  }
  return Model<float>(cfg, params);
}

void save_checkpoint(const Model<float>& model, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(model);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

Model<float> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace othello::lm
