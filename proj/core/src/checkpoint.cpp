#include "hwdnet/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <torch/torch.h>
#include <zlib.h>

#include "hwdnet/error.hpp"

namespace hwdnet {

namespace {

constexpr char kMagic[8] = {'H', 'W', 'D', 'N', 'E', 'T', 'C', 'K'};

std::string dtype_name(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat32: return "float32";
    case torch::kFloat64: return "float64";
    case torch::kInt64: return "int64";
    case torch::kInt32: return "int32";
    default: throw CheckpointError(std::string("unsupported tensor dtype ") + c10::toString(t));
  }
}

torch::ScalarType parse_dtype(const std::string& s) {
  if (s == "float32") return torch::kFloat32;
  if (s == "float64") return torch::kFloat64;
  if (s == "int64") return torch::kInt64;
  if (s == "int32") return torch::kInt32;
  throw CheckpointError("unknown tensor dtype '" + s + "'");
}

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw CheckpointError("truncated checkpoint");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

std::uint32_t crc(const char* data, std::size_t n) {
  uLong c = crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    c = crc32(c, reinterpret_cast<const Bytef*>(data), chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(c);
}

void append_tensors(const std::vector<NamedTensor>& tensors, const std::string& group, nlohmann::ordered_json& table,
                    std::string& blob) {
  for (const auto& [name, tensor] : tensors) {
    const auto t = tensor.detach().to(torch::kCPU).contiguous();
    const auto nbytes = static_cast<std::size_t>(t.numel()) * t.element_size();
    table.push_back({{"name", name},
                     {"group", group},
                     {"dtype", dtype_name(t.scalar_type())},
                     {"shape", t.sizes().vec()},
                     {"offset", blob.size()},
                     {"nbytes", nbytes}});
    blob.append(static_cast<const char*>(t.data_ptr()), nbytes);
  }
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  nlohmann::ordered_json header;
  header["epoch"] = ckpt.epoch;
  header["step"] = ckpt.step;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::array();
  for (const auto& [k, v] : ckpt.config) cfg.push_back({k, v});
  header["config"] = cfg;
  header["identity_classes"] = ckpt.identity_classes;
  header["rng_state"] = ckpt.rng_state;
  std::string blob;
  nlohmann::ordered_json table = nlohmann::ordered_json::array();
  append_tensors(ckpt.model, "model", table, blob);
  append_tensors(ckpt.optimizer, "optimizer", table, blob);
  header["tensors"] = table;
  const std::string header_text = header.dump();

  std::string out(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, ckpt.format_version);
  put<std::uint64_t>(out, header_text.size());
  out += header_text;
  out += blob;
  put<std::uint32_t>(out, crc(out.data(), out.size()));
  return out;
}

Checkpoint parse_checkpoint(const std::string& bytes, const std::string& origin) {
  if (bytes.size() < sizeof kMagic + 16 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw CheckpointError(origin + ": not a checkpoint file");
  }
  std::size_t pos = sizeof kMagic;
  Checkpoint ckpt;
  ckpt.format_version = get<std::uint32_t>(bytes, pos);
  if (ckpt.format_version != kCheckpointVersion) {
    throw CheckpointError(origin + ": checkpoint format version " + std::to_string(ckpt.format_version) +
                          " cannot be migrated to version " + std::to_string(kCheckpointVersion));
  }
  const std::size_t body = bytes.size() - sizeof(std::uint32_t);
  std::size_t tail = body;
  if (get<std::uint32_t>(bytes, tail) != crc(bytes.data(), body)) {
    throw CheckpointError(origin + ": checksum mismatch, file is corrupt");
  }
  const auto header_len = get<std::uint64_t>(bytes, pos);
  if (header_len > body - pos) throw CheckpointError(origin + ": truncated header");
  const std::size_t blob_begin = pos + header_len;
  try {
    const auto header = nlohmann::json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                              bytes.begin() + static_cast<std::ptrdiff_t>(blob_begin));
    ckpt.epoch = header.at("epoch").get<int>();
    ckpt.step = header.at("step").get<std::int64_t>();
    for (const auto& kv : header.at("config")) {
      ckpt.config.emplace_back(kv.at(0).get<std::string>(), kv.at(1).get<std::string>());
    }
    ckpt.identity_classes = header.at("identity_classes").get<std::vector<std::int64_t>>();
    ckpt.rng_state = header.at("rng_state").get<std::string>();
    for (const auto& entry : header.at("tensors")) {
      const auto offset = entry.at("offset").get<std::size_t>();
      const auto nbytes = entry.at("nbytes").get<std::size_t>();
      if (offset > body - blob_begin || nbytes > body - blob_begin - offset) {
        throw CheckpointError(origin + ": tensor data out of range");
      }
      const auto shape = entry.at("shape").get<std::vector<std::int64_t>>();
      auto t = torch::empty(shape, torch::TensorOptions().dtype(parse_dtype(entry.at("dtype").get<std::string>())));
      if (static_cast<std::size_t>(t.numel()) * t.element_size() != nbytes) {
        throw CheckpointError(origin + ": tensor size does not match its shape");
      }
      std::memcpy(t.data_ptr(), bytes.data() + blob_begin + offset, nbytes);
      const auto group = entry.at("group").get<std::string>();
      NamedTensor nt{entry.at("name").get<std::string>(), t};
      if (group == "model") ckpt.model.push_back(std::move(nt));
      else if (group == "optimizer") ckpt.optimizer.push_back(std::move(nt));
      else throw CheckpointError(origin + ": unknown tensor group '" + group + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(origin + ": malformed header: " + e.what());
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& file) {
  const std::string bytes = serialize_checkpoint(ckpt);
  auto tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, file, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + file.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str(), file.string());
}

}  // namespace hwdnet
