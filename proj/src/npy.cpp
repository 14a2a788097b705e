#include "brainalign/npy.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>

namespace brainalign {

static_assert(std::endian::native == std::endian::little,
              "NPY payloads are read by memcpy; big-endian hosts are not supported");

namespace {

constexpr char kMagic[] = {'\x93', 'N', 'U', 'M', 'P', 'Y'};
constexpr std::size_t kPreludeSize = 10;  // magic(6) + version(2) + header_len(2)

Error format_error(const std::string& code, const std::string& message) {
  return Error(ErrorKind::Format, code, "npy: " + message);
}
Error unsupported(const std::string& code, const std::string& message) {
  return Error(ErrorKind::Unsupported, code, "npy: " + message);
}

// Minimal reader for the Python-literal dict numpy writes, e.g.
//   {'descr': '<f4', 'fortran_order': False, 'shape': (2, 3), }
class HeaderParser {
 public:
  explicit HeaderParser(std::string_view text) : text_(text) {}

  struct Header {
    std::optional<std::string> descr;
    std::optional<bool> fortran_order;
    std::optional<std::vector<std::size_t>> shape;
  };

  Header parse() {
    Header h;
    skip_ws();
    expect('{');
    for (;;) {
      skip_ws();
      if (peek() == '}') {
        ++pos_;
        break;
      }
      const std::string key = quoted();
      skip_ws();
      expect(':');
      skip_ws();
      if (key == "descr") {
        h.descr = quoted();
      } else if (key == "fortran_order") {
        h.fortran_order = boolean();
      } else if (key == "shape") {
        h.shape = tuple();
      } else {
        throw format_error("BAD_HEADER", "unexpected header key '" + key + "'");
      }
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      skip_ws();
      expect('}');
      break;
    }
    skip_ws();
    if (pos_ != text_.size()) throw format_error("BAD_HEADER", "trailing bytes after header dict");
    return h;
  }

 private:
  char peek() const {
    if (pos_ >= text_.size()) throw format_error("BAD_HEADER", "header dict ends early");
    return text_[pos_];
  }
  void expect(char c) {
    if (peek() != c) throw format_error("BAD_HEADER", std::string("expected '") + c + "' in header");
    ++pos_;
  }
  void skip_ws() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\n' || text_[pos_] == '\t'))
      ++pos_;
  }
  std::string quoted() {
    const char q = peek();
    if (q != '\'' && q != '"') throw format_error("BAD_HEADER", "expected quoted string in header");
    ++pos_;
    const auto end = text_.find(q, pos_);
    if (end == std::string_view::npos) throw format_error("BAD_HEADER", "unterminated string");
    std::string s(text_.substr(pos_, end - pos_));
    pos_ = end + 1;
    return s;
  }
  bool boolean() {
    if (text_.substr(pos_, 4) == "True") {
      pos_ += 4;
      return true;
    }
    if (text_.substr(pos_, 5) == "False") {
      pos_ += 5;
      return false;
    }
    throw format_error("BAD_HEADER", "fortran_order must be True or False");
  }
  std::vector<std::size_t> tuple() {
    std::vector<std::size_t> dims;
    expect('(');
    for (;;) {
      skip_ws();
      if (peek() == ')') {
        ++pos_;
        return dims;
      }
      if (peek() < '0' || peek() > '9') throw format_error("BAD_HEADER", "shape entries must be non-negative integers");
      std::size_t value = 0;
      while (pos_ < text_.size() && text_[pos_] >= '0' && text_[pos_] <= '9') {
        value = value * 10 + static_cast<std::size_t>(text_[pos_] - '0');
        if (value > (std::size_t{1} << 48)) throw format_error("BAD_HEADER", "shape entry too large");
        ++pos_;
      }
      dims.push_back(value);
      skip_ws();
      if (peek() == ',') ++pos_;
      else if (peek() != ')') throw format_error("BAD_HEADER", "malformed shape tuple");
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

std::string shape_literal(std::span<const std::size_t> shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  if (shape.size() == 1) os << ',';
  os << ')';
  return os.str();
}

std::size_t element_count(std::span<const std::size_t> shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

}  // namespace

const char* to_descr(NpyDtype dtype) noexcept { return dtype == NpyDtype::F4 ? "<f4" : "<f8"; }

NpyDtype dtype_from_descr(std::string_view descr) {
  if (descr == "<f4") return NpyDtype::F4;
  if (descr == "<f8") return NpyDtype::F8;
  throw unsupported("UNSUPPORTED_DTYPE", "dtype '" + std::string(descr) + "' (only <f4 and <f8)");
}

std::size_t NpyArray::size() const noexcept { return element_count(shape); }

NpyArray parse_npy(std::span<const char> bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw format_error("BAD_MAGIC", "missing \\x93NUMPY magic");
  if (bytes.size() < kPreludeSize) throw Error(ErrorKind::Truncation, "TRUNCATED", "npy: file ends inside prelude");
  const auto major = static_cast<unsigned char>(bytes[6]);
  const auto minor = static_cast<unsigned char>(bytes[7]);
  if (major != 1 || minor != 0)
    throw unsupported("UNSUPPORTED_VERSION", "format version " + std::to_string(major) + "." +
                                                 std::to_string(minor) + " (only 1.0)");
  const std::size_t header_len = static_cast<unsigned char>(bytes[8]) |
                                 (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
  if (bytes.size() < kPreludeSize + header_len)
    throw Error(ErrorKind::Truncation, "TRUNCATED", "npy: file ends inside header");
  std::string_view header(bytes.data() + kPreludeSize, header_len);
  for (char c : header)
    if (static_cast<unsigned char>(c) > 0x7F) throw format_error("BAD_HEADER", "non-ASCII header");
  if (header.empty() || header.back() != '\n') throw format_error("BAD_HEADER", "header not newline-terminated");

  const auto h = HeaderParser(header).parse();
  if (!h.descr || !h.fortran_order || !h.shape)
    throw format_error("BAD_HEADER", "header must define descr, fortran_order and shape");

  NpyArray out;
  out.dtype = dtype_from_descr(*h.descr);
  if (*h.fortran_order) throw unsupported("FORTRAN_ORDER", "fortran_order=True arrays are not accepted");
  out.shape = *h.shape;

  const std::size_t n = out.size();
  const std::size_t width = out.dtype == NpyDtype::F4 ? 4 : 8;
  const std::size_t payload = bytes.size() - kPreludeSize - header_len;
  if (payload != n * width)
    throw Error(ErrorKind::Truncation, "TRUNCATED",
                "npy: payload has " + std::to_string(payload) + " bytes, header implies " +
                    std::to_string(n * width));
  const char* data = bytes.data() + kPreludeSize + header_len;
  out.values.resize(n);
  if (out.dtype == NpyDtype::F8) {
    std::memcpy(out.values.data(), data, n * 8);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      float f;
      std::memcpy(&f, data + 4 * i, 4);
      out.values[i] = f;
    }
  }
  return out;
}

NpyArray load_npy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "IO", "cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return parse_npy(bytes);
  } catch (const Error& e) {
    throw Error(e.kind(), e.code(), std::string(e.what()) + " [" + path.string() + "]");
  }
}

std::string encode_npy(std::span<const double> values, std::span<const std::size_t> shape,
                       NpyDtype dtype) {
  if (values.size() != element_count(shape))
    throw parameter_error("npy: value count does not match shape");
  for (double v : values) {
    if (!std::isfinite(v) || (dtype == NpyDtype::F4 && !std::isfinite(static_cast<float>(v))))
      throw Error(ErrorKind::Validation, "NONFINITE", "npy: refusing to write non-finite value");
  }
  std::string header = std::string("{'descr': '") + to_descr(dtype) +
                       "', 'fortran_order': False, 'shape': " + shape_literal(shape) + ", }";
  // Pad so the payload starts on a 64-byte boundary, as numpy does.
  const std::size_t unpadded = kPreludeSize + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header.push_back('\n');

  std::string out(kMagic, sizeof(kMagic));
  out.push_back('\x01');
  out.push_back('\x00');
  out.push_back(static_cast<char>(header.size() & 0xFF));
  out.push_back(static_cast<char>((header.size() >> 8) & 0xFF));
  out += header;
  const std::size_t offset = out.size();
  if (dtype == NpyDtype::F8) {
    out.resize(offset + values.size() * 8);
    std::memcpy(out.data() + offset, values.data(), values.size() * 8);
  } else {
    out.resize(offset + values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
      const float f = static_cast<float>(values[i]);
      std::memcpy(out.data() + offset + 4 * i, &f, 4);
    }
  }
  return out;
}

void save_npy(const NpyArray& array, const std::filesystem::path& path, NpyDtype dtype) {
  const std::string bytes = encode_npy(array.values, array.shape, dtype);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "IO", "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::Io, "IO", "write failed for " + path.string());
}

void save_npy(const NpyArray& array, const std::filesystem::path& path) {
  save_npy(array, path, array.dtype);
}

NpyArray to_npy(const Eigen::Ref<const Matrix>& m, NpyDtype dtype) {
  NpyArray a;
  a.dtype = dtype;
  a.shape = {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())};
  a.values.resize(static_cast<std::size_t>(m.size()));
  Eigen::Map<RowMatrix>(a.values.data(), m.rows(), m.cols()) = m;
  // Hold exactly what a float32 file would store.
  if (dtype == NpyDtype::F4)
    for (double& v : a.values) v = static_cast<double>(static_cast<float>(v));
  return a;
}

Matrix matrix_from_npy(const NpyArray& array) {
  if (array.ndim() != 2) throw parameter_error("npy: expected a 2-D array");
  return Eigen::Map<const RowMatrix>(array.values.data(), static_cast<Index>(array.shape[0]),
                                     static_cast<Index>(array.shape[1]));
}

}  // namespace brainalign
