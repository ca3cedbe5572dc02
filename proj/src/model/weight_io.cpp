#include "e2emd/model/weight_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

namespace e2emd::model {

using namespace e2emd::nn;

static_assert(std::numeric_limits<float>::is_iec559, "weight format stores IEEE-754 binary32");

namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8(const char* what) { return take(1, what)[0]; }
  std::uint16_t u16(const char* what) {
    auto b = take(2, what);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }
  std::uint32_t u32(const char* what) {
    auto b = take(4, what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }
  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw ParseError("truncated", std::string("weight file truncated while reading ") + what + " at byte " +
                                        std::to_string(pos_));
    }
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t position() const { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void write_tensor_header(Writer& w, const std::string& name, const Tensor& t) {
  if (name.empty() || name.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw ConfigError("tensor name length must be in [1, 65535]: '" + name + "'");
  }
  if (t.rank() == 0 || t.rank() > 255) throw DimensionError("tensor " + name + " must have 1..255 dims");
  w.u16(static_cast<std::uint16_t>(name.size()));
  w.bytes(name);
  w.u8(0);
  w.u8(static_cast<std::uint8_t>(t.rank()));
  for (std::size_t d : t.shape()) {
    if (d > std::numeric_limits<std::uint32_t>::max()) throw DimensionError("tensor " + name + " dim exceeds u32");
    w.u32(static_cast<std::uint32_t>(d));
  }
}

std::size_t tensor_header_bytes(const std::string& name, const Tensor& t) { return 2 + name.size() + 2 + 4 * t.rank(); }

}  // namespace

std::vector<std::uint8_t> encode_weights(const WeightStore& weights) {
  if (weights.size() > std::numeric_limits<std::uint32_t>::max()) throw ConfigError("too many tensors");
  Writer w;
  w.bytes(kWeightMagic);
  w.u16(kWeightVersion);
  w.u16(0);
  w.u32(static_cast<std::uint32_t>(weights.size()));
  w.u32(0);
  // std::map iterates in ascending byte-wise order, which is the file order.
  for (const auto& [name, t] : weights) {
    write_tensor_header(w, name, t);
    for (float v : t) w.f32(v);
  }
  return w.take();
}

WeightStore decode_weights(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const auto magic = r.take(4, "magic");
  if (std::memcmp(magic.data(), kWeightMagic.data(), 4) != 0) throw ParseError("bad_magic", "not an E2EW weight file");
  const std::uint16_t version = r.u16("version");
  if (version != kWeightVersion) {
    throw ParseError("bad_version", "unsupported weight file version " + std::to_string(version));
  }
  if (r.u16("reserved") != 0) throw ParseError("bad_reserved", "reserved header field is not zero");
  const std::uint32_t count = r.u32("tensor count");
  if (r.u32("reserved") != 0) throw ParseError("bad_reserved", "reserved header field is not zero");

  WeightStore store;
  std::string previous;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t name_len = r.u16("name length");
    if (name_len == 0) throw ParseError("empty_name", "tensor " + std::to_string(i) + " has an empty name");
    const auto name_bytes = r.take(name_len, "tensor name");
    std::string name(name_bytes.begin(), name_bytes.end());
    if (i > 0 && name == previous) throw ParseError("duplicate_name", "duplicate tensor name " + name);
    if (i > 0 && name < previous) throw ParseError("unsorted_names", "tensor " + name + " is out of name order");
    const std::uint8_t dtype = r.u8("dtype");
    if (dtype != 0) throw ParseError("bad_dtype", "tensor " + name + " has unsupported dtype " + std::to_string(dtype));
    const std::uint8_t ndims = r.u8("ndims");
    if (ndims == 0) throw ParseError("bad_dims", "tensor " + name + " has no dims");
    Shape shape(ndims);
    std::uint64_t elements = 1;
    for (auto& d : shape) {
      d = r.u32("dims");
      if (d == 0) throw ParseError("bad_dims", "tensor " + name + " has a zero dim");
      elements *= d;
      if (elements * 4 > r.remaining()) {
        throw ParseError("truncated", "tensor " + name + " data exceeds the remaining file size");
      }
    }
    const auto raw = r.take(static_cast<std::size_t>(elements) * 4, "tensor data");
    std::vector<float> data(static_cast<std::size_t>(elements));
    for (std::size_t k = 0; k < data.size(); ++k) {
      const std::uint32_t bits = static_cast<std::uint32_t>(raw[4 * k]) |
                                 (static_cast<std::uint32_t>(raw[4 * k + 1]) << 8) |
                                 (static_cast<std::uint32_t>(raw[4 * k + 2]) << 16) |
                                 (static_cast<std::uint32_t>(raw[4 * k + 3]) << 24);
      data[k] = std::bit_cast<float>(bits);
    }
    previous = name;
    store.emplace(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  if (r.remaining() != 0) {
    throw ParseError("trailing_bytes", std::to_string(r.remaining()) + " unexpected bytes after the last tensor");
  }
  return store;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io_error", "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io_error", "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("io_error", "failed writing " + path.string());
}

void save_weights(const WeightStore& weights, const std::filesystem::path& path) {
  write_file(path, encode_weights(weights));
}

WeightStore load_weights(const std::filesystem::path& path) { return decode_weights(read_file(path)); }

bool is_prunable(std::string_view name) {
  constexpr std::string_view suffix = "/kernel";
  return name.size() >= suffix.size() && name.substr(name.size() - suffix.size()) == suffix;
}

double prunable_sparsity(const WeightStore& weights) {
  std::size_t zeros = 0, total = 0;
  for (const auto& [name, t] : weights) {
    if (!is_prunable(name)) continue;
    total += t.size();
    for (float v : t) zeros += v == 0.0f;
  }
  return total == 0 ? 0.0 : static_cast<double>(zeros) / static_cast<double>(total);
}

std::size_t dense_encoded_bytes(const WeightStore& weights) {
  std::size_t bytes = kWeightHeaderBytes;
  for (const auto& [name, t] : weights) bytes += tensor_header_bytes(name, t) + 4 * t.size();
  return bytes;
}

std::size_t sparse_encoded_bytes(const WeightStore& weights) {
  std::size_t bytes = kWeightHeaderBytes;
  for (const auto& [name, t] : weights) {
    bytes += tensor_header_bytes(name, t);
    if (is_prunable(name)) {
      std::size_t nonzero = 0;
      for (float v : t) nonzero += v != 0.0f;
      bytes += (t.size() + 7) / 8 + 4 * nonzero;
    } else {
      bytes += 4 * t.size();
    }
  }
  return bytes;
}

}  // namespace e2emd::model
