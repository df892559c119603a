// Checkpoint container:
//   "SNXC" | u32 version | u32 config length | config text (key=value)
//   u32 tensor count | per tensor: u32 name length | name | u8 dtype | u32 rank | u64 extents[rank] | payload
// All integers and payloads little-endian. dtype 1 = float32.

#include <bit>
#include <cstring>
#include <map>

#include "salsanext/model.hpp"
#include "salsanext/tensor_io.hpp"

namespace salsanext {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

constexpr char kMagic[4] = {'S', 'N', 'X', 'C'};
constexpr char kTensorMagic[4] = {'S', 'N', 'X', 'T'};
constexpr std::uint32_t kTensorVersion = 1;
constexpr std::uint8_t kDtypeF32 = 1;

class Writer {
 public:
  template <typename T>
  void put(T value) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    out.insert(out.end(), p, p + sizeof(T));
  }
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out.insert(out.end(), p, p + n);
  }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    T value;
    std::memcpy(&value, take(sizeof(T), what), sizeof(T));
    return value;
  }
  const std::uint8_t* take(std::size_t n, const char* what) {
    if (n > bytes_.size() - pos_)
      throw Error(ErrorCode::CorruptCheckpoint, std::string("checkpoint truncated while reading ") + what);
    const auto* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void write_record(Writer& w, const std::string& name, const Tensor& t) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
  w.bytes(name.data(), name.size());
  w.put<std::uint8_t>(kDtypeF32);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
  for (Index d : t.shape()) w.put<std::uint64_t>(static_cast<std::uint64_t>(d));
  w.bytes(t.data(), static_cast<std::size_t>(t.size()) * sizeof(float));
}

std::pair<std::string, Tensor> read_record(Reader& r, std::size_t blob_size) {
  const auto name_len = r.get<std::uint32_t>("tensor name length");
  const auto* name_bytes = r.take(name_len, "tensor name");
  std::string name(reinterpret_cast<const char*>(name_bytes), name_len);
  const auto dtype = r.get<std::uint8_t>("dtype");
  if (dtype != kDtypeF32) throw Error(ErrorCode::IncompatibleCheckpoint, "tensor " + name + " has unknown dtype");
  const auto rank = r.get<std::uint32_t>("rank");
  if (rank > 8) throw Error(ErrorCode::CorruptCheckpoint, "tensor " + name + " has implausible rank");
  Shape shape;
  std::uint64_t elements = 1;
  for (std::uint32_t d = 0; d < rank; ++d) {
    const auto extent = r.get<std::uint64_t>("extent");
    if (extent > blob_size) throw Error(ErrorCode::CorruptCheckpoint, "tensor " + name + " extent exceeds the blob");
    elements *= extent;
    if (elements > blob_size) throw Error(ErrorCode::CorruptCheckpoint, "tensor " + name + " exceeds the blob");
    shape.push_back(static_cast<Index>(extent));
  }
  Tensor t(shape);
  std::memcpy(t.data(), r.take(elements * sizeof(float), "tensor payload"), elements * sizeof(float));
  return {std::move(name), std::move(t)};
}

}  // namespace

std::vector<std::uint8_t> save_checkpoint(const Model& model) {
  Writer w;
  w.bytes(kMagic, 4);
  w.put<std::uint32_t>(kCheckpointVersion);
  const std::string cfg = model.config.to_text();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(cfg.size()));
  w.bytes(cfg.data(), cfg.size());

  std::uint32_t count = 0;
  model.for_each_tensor(Model::ConstVisitor([&](const std::string&, const Tensor&, TensorRole, bool) { ++count; }));
  w.put<std::uint32_t>(count);
  model.for_each_tensor(Model::ConstVisitor(
      [&](const std::string& name, const Tensor& t, TensorRole, bool) { write_record(w, name, t); }));
  return std::move(w.out);
}

Model load_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw Error(ErrorCode::CorruptCheckpoint, "checkpoint too short for a header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw Error(ErrorCode::IncompatibleCheckpoint, "not a checkpoint (bad magic)");
  Reader r(bytes.subspan(4));
  const auto version = r.get<std::uint32_t>("version");
  if (version == 0 || version > kCheckpointVersion)
    throw Error(ErrorCode::IncompatibleCheckpoint,
                "checkpoint format version " + std::to_string(version) + " is not supported (max " +
                    std::to_string(kCheckpointVersion) + ")");
  const auto cfg_len = r.get<std::uint32_t>("config length");
  const auto* cfg_bytes = r.take(cfg_len, "config block");
  ModelConfig cfg;
  try {
    cfg = ModelConfig::parse(std::string(reinterpret_cast<const char*>(cfg_bytes), cfg_len));
  } catch (const Error& e) {
    throw Error(ErrorCode::CorruptCheckpoint, std::string("checkpoint config block: ") + e.what());
  }

  std::map<std::string, Tensor> records;
  const auto count = r.get<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    auto [name, t] = read_record(r, bytes.size());
    if (records.count(name)) throw Error(ErrorCode::CorruptCheckpoint, "duplicate tensor " + name);
    records[std::move(name)] = std::move(t);
  }
  if (!r.done()) throw Error(ErrorCode::CorruptCheckpoint, "trailing bytes after the last tensor record");

  Model model = build_model(cfg, 0);
  std::size_t matched = 0;
  model.for_each_tensor(Model::Visitor([&](const std::string& name, Tensor& t, TensorRole, bool) {
    const auto it = records.find(name);
    if (it == records.end()) throw Error(ErrorCode::CorruptCheckpoint, "checkpoint lacks tensor " + name);
    if (it->second.shape() != t.shape())
      throw Error(ErrorCode::CorruptCheckpoint, "tensor " + name + " has shape " + shape_string(it->second.shape()) +
                                                    ", model expects " + shape_string(t.shape()));
    t = it->second;
    ++matched;
  }));
  if (matched != records.size()) throw Error(ErrorCode::CorruptCheckpoint, "checkpoint has tensors the model does not");
  return model;
}

std::vector<std::uint8_t> save_tensors(const NamedTensors& tensors) {
  Writer w;
  w.bytes(kTensorMagic, 4);
  w.put<std::uint32_t>(kTensorVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) write_record(w, name, t);
  return std::move(w.out);
}

NamedTensors load_tensors(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw Error(ErrorCode::CorruptCheckpoint, "tensor file too short for a header");
  if (std::memcmp(bytes.data(), kTensorMagic, 4) != 0)
    throw Error(ErrorCode::IncompatibleCheckpoint, "not a tensor file (bad magic)");
  Reader r(bytes.subspan(4));
  const auto version = r.get<std::uint32_t>("version");
  if (version == 0 || version > kTensorVersion)
    throw Error(ErrorCode::IncompatibleCheckpoint, "tensor file version " + std::to_string(version) + " is not supported");
  NamedTensors out;
  const auto count = r.get<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) out.push_back(read_record(r, bytes.size()));
  if (!r.done()) throw Error(ErrorCode::CorruptCheckpoint, "trailing bytes after the last tensor record");
  return out;
}

}  // namespace salsanext
