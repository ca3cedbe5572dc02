#include "e2emd/data/npy.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <map>

#include "e2emd/common/error.hpp"

namespace e2emd::data {

using namespace e2emd::nn;

namespace {

constexpr std::uint8_t kMagic[6] = {0x93, 'N', 'U', 'M', 'P', 'Y'};

// Minimal reader for the Python dict literal in the header, e.g.
//   {'descr': '<f4', 'fortran_order': False, 'shape': (2, 3), }
class HeaderParser {
 public:
  explicit HeaderParser(std::string_view text) : s_(text) {}

  std::map<std::string, std::string> parse_dict() {
    std::map<std::string, std::string> out;
    expect('{');
    for (;;) {
      skip_ws();
      if (peek() == '}') {
        ++pos_;
        break;
      }
      std::string key = parse_string();
      expect(':');
      skip_ws();
      std::string value;
      if (peek() == '\'' || peek() == '"') {
        value = "'" + parse_string() + "'";
      } else if (peek() == '(') {
        const std::size_t end = s_.find(')', pos_);
        if (end == std::string_view::npos) fail("unterminated tuple");
        value = std::string(s_.substr(pos_, end + 1 - pos_));
        pos_ = end + 1;
      } else {
        const std::size_t start = pos_;
        while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
        value = std::string(s_.substr(start, pos_ - start));
        if (value.empty()) fail("unexpected character in value");
      }
      if (!out.emplace(std::move(key), std::move(value)).second) fail("duplicate key");
      skip_ws();
      if (peek() == ',') {
        ++pos_;
      } else if (peek() != '}') {
        fail("expected ',' or '}'");
      }
    }
    skip_ws();
    if (pos_ != s_.size()) fail("text after header dict");
    return out;
  }

 private:
  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\n' || s_[pos_] == '\t')) ++pos_;
  }
  void expect(char c) {
    skip_ws();
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }
  std::string parse_string() {
    skip_ws();
    const char quote = peek();
    if (quote != '\'' && quote != '"') fail("expected a quoted string");
    const std::size_t end = s_.find(quote, pos_ + 1);
    if (end == std::string_view::npos) fail("unterminated string");
    std::string out(s_.substr(pos_ + 1, end - pos_ - 1));
    pos_ = end + 1;
    return out;
  }
  [[noreturn]] void fail(const std::string& why) const {
    throw ParseError("bad_header", "NPY header: " + why + " at offset " + std::to_string(pos_));
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

Shape parse_shape(const std::string& tuple) {
  Shape shape;
  std::size_t i = 1;
  while (i + 1 < tuple.size()) {
    while (i + 1 < tuple.size() && (tuple[i] == ' ' || tuple[i] == ',')) ++i;
    if (i + 1 >= tuple.size()) break;
    if (!std::isdigit(static_cast<unsigned char>(tuple[i]))) {
      throw ParseError("bad_header", "NPY shape is not a tuple of integers: " + tuple);
    }
    std::size_t d = 0;
    while (i + 1 < tuple.size() && std::isdigit(static_cast<unsigned char>(tuple[i]))) {
      if (d > (std::size_t{1} << 40)) throw ParseError("bad_header", "NPY dim too large: " + tuple);
      d = d * 10 + static_cast<std::size_t>(tuple[i] - '0');
      ++i;
    }
    shape.push_back(d);
  }
  return shape;
}

template <typename T>
std::vector<std::uint8_t> write_impl(const Shape& shape, std::span<const T> data, const char* descr) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  if (n != data.size()) throw DimensionError("write_npy: data length does not match shape " + shape_string(shape));
  // Python tuple syntax: "()", "(5,)", "(2, 3)".
  std::string dims;
  for (std::size_t i = 0; i < shape.size(); ++i) dims += (i ? ", " : "") + std::to_string(shape[i]);
  if (shape.size() == 1) dims += ",";
  std::string header = std::string("{'descr': '") + descr + "', 'fortran_order': False, 'shape': (" + dims + "), }";
  const std::size_t unpadded = 10 + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header.push_back('\n');
  std::vector<std::uint8_t> out(kMagic, kMagic + 6);
  out.push_back(1);
  out.push_back(0);
  out.push_back(static_cast<std::uint8_t>(header.size() & 0xff));
  out.push_back(static_cast<std::uint8_t>(header.size() >> 8));
  out.insert(out.end(), header.begin(), header.end());
  for (T v : data) {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    const U bits = std::bit_cast<U>(v);
    for (std::size_t b = 0; b < sizeof(T); ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
  }
  return out;
}

}  // namespace

NpyArray parse_npy(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 6 || std::memcmp(bytes.data(), kMagic, 6) != 0) throw ParseError("bad_magic", "not an NPY file");
  if (bytes.size() < 10) throw ParseError("length_mismatch", "NPY file truncated in the preamble");
  if (bytes[6] != 1 || bytes[7] != 0) {
    throw ParseError("bad_version", "unsupported NPY version " + std::to_string(bytes[6]) + "." + std::to_string(bytes[7]));
  }
  const std::size_t header_len = bytes[8] | (static_cast<std::size_t>(bytes[9]) << 8);
  if (bytes.size() < 10 + header_len) throw ParseError("length_mismatch", "NPY file truncated in the header");
  std::string_view header(reinterpret_cast<const char*>(bytes.data()) + 10, header_len);
  while (!header.empty() && (header.back() == '\n' || header.back() == ' ')) header.remove_suffix(1);
  const auto dict = HeaderParser(header).parse_dict();
  for (const char* key : {"descr", "fortran_order", "shape"}) {
    if (!dict.count(key)) throw ParseError("bad_header", std::string("NPY header lacks '") + key + "'");
  }
  if (dict.size() != 3) throw ParseError("bad_header", "NPY header has unexpected keys");

  const std::string& order = dict.at("fortran_order");
  if (order == "True") throw ParseError("fortran_order", "fortran order unsupported");
  if (order != "False") throw ParseError("bad_header", "fortran_order must be True or False");

  NpyArray out;
  const std::string& descr = dict.at("descr");
  std::size_t item = 0;
  if (descr == "'<f4'") {
    out.dtype = NpyDtype::f4;
    item = 4;
  } else if (descr == "'<f8'") {
    out.dtype = NpyDtype::f8;
    item = 8;
  } else {
    throw ParseError("bad_dtype", "unsupported NPY dtype " + descr + " (need '<f4' or '<f8')");
  }
  const std::string& tuple = dict.at("shape");
  if (tuple.front() != '(') throw ParseError("bad_header", "NPY shape must be a tuple");
  out.shape = parse_shape(tuple);

  std::size_t n = 1;
  for (std::size_t d : out.shape) n *= d;
  const std::size_t body = bytes.size() - 10 - header_len;
  if (body != n * item) {
    throw ParseError("length_mismatch", "NPY data is " + std::to_string(body) + " bytes, shape needs " +
                                            std::to_string(n * item));
  }
  out.data.resize(n);
  const std::uint8_t* p = bytes.data() + 10 + header_len;
  for (std::size_t i = 0; i < n; ++i, p += item) {
    std::uint64_t bits = 0;
    for (std::size_t b = 0; b < item; ++b) bits |= static_cast<std::uint64_t>(p[b]) << (8 * b);
    out.data[i] = item == 4 ? static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(bits)))
                            : std::bit_cast<double>(bits);
  }
  return out;
}

Tensor NpyArray::to_tensor() const {
  if (shape.empty() || data.empty()) throw DimensionError("NPY array has no elements to form a tensor");
  std::vector<float> values(data.begin(), data.end());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) throw DataError("NPY value " + std::to_string(i) + " is not finite as a 32-bit real");
  }
  return Tensor(shape, std::move(values));
}

std::vector<std::uint8_t> write_npy(const Shape& shape, std::span<const float> data) {
  return write_impl(shape, data, "<f4");
}

std::vector<std::uint8_t> write_npy(const Shape& shape, std::span<const double> data) {
  return write_impl(shape, data, "<f8");
}

}  // namespace e2emd::data
