#include "jotlas/jotl_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "jotlas/errors.hpp"

namespace jotlas {

namespace {

constexpr char kMagic[4] = {'J', 'O', 'T', 'L'};
constexpr std::uint16_t kVersion = 1;

void put_u16le(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32le(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32le(out, bits);
}

void put_f64le(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(const std::string& path, std::string buffer) : path_(path), buf_(std::move(buffer)) {}

  std::size_t remaining() const { return buf_.size() - pos_; }

  void need(std::size_t n, const char* what) {
    if (remaining() < n) {
      throw JotlTruncatedError("truncated JOTL file '" + path_ + "': expected " +
                               std::to_string(n) + " more bytes for " + what + ", have " +
                               std::to_string(remaining()));
    }
  }

  std::uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<std::uint8_t>(buf_[pos_++]);
  }

  std::uint16_t u16le(const char* what) {
    need(2, what);
    std::uint16_t v = static_cast<std::uint8_t>(buf_[pos_]) |
                      (static_cast<std::uint16_t>(static_cast<std::uint8_t>(buf_[pos_ + 1])) << 8);
    pos_ += 2;
    return v;
  }

  std::uint32_t u32le(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  float f32le(const char* what) {
    std::uint32_t bits = u32le(what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

  double f64le(const char* what) {
    need(8, what);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
      bits |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf_[pos_ + i])) << (8 * i);
    }
    pos_ += 8;
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }

  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::string buf_;
  std::size_t pos_ = 0;
};

std::string read_whole_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return buf;
}

void write_whole_file(const std::string& path, const std::string& buf) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace

std::size_t jotl_dtype_size(JotlDtype dtype) {
  switch (dtype) {
    case JotlDtype::complex64: return 8;
    case JotlDtype::complex128: return 16;
    case JotlDtype::real64: return 8;
  }
  throw JotlUnsupportedError("unsupported JOTL dtype code " +
                             std::to_string(static_cast<int>(dtype)));
}

std::size_t JotlTensor::element_count() const {
  std::size_t n = 1;
  for (std::uint32_t d : dims) n *= d;
  return n;
}

void save_jotl(const std::string& path, const JotlTensor& tensor) {
  const std::size_t n = tensor.element_count();
  const bool complex = tensor.dtype != JotlDtype::real64;
  if (complex && tensor.cvalues.size() != n) {
    throw std::invalid_argument("JOTL payload size does not match dims");
  }
  if (!complex && tensor.rvalues.size() != n) {
    throw std::invalid_argument("JOTL payload size does not match dims");
  }
  if (tensor.dims.empty() || tensor.dims.size() > 255) {
    throw std::invalid_argument("JOTL dims must have 1..255 entries");
  }

  std::string buf;
  buf.reserve(12 + 4 * tensor.dims.size() + n * jotl_dtype_size(tensor.dtype));
  buf.append(kMagic, 4);
  put_u16le(buf, kVersion);
  buf.push_back(static_cast<char>(tensor.dtype));
  buf.push_back(static_cast<char>(tensor.dims.size()));
  for (std::uint32_t d : tensor.dims) put_u32le(buf, d);

  switch (tensor.dtype) {
    case JotlDtype::complex64:
      for (const Complex& v : tensor.cvalues) {
        put_f32le(buf, static_cast<float>(v.real()));
        put_f32le(buf, static_cast<float>(v.imag()));
      }
      break;
    case JotlDtype::complex128:
      for (const Complex& v : tensor.cvalues) {
        put_f64le(buf, v.real());
        put_f64le(buf, v.imag());
      }
      break;
    case JotlDtype::real64:
      for (double v : tensor.rvalues) put_f64le(buf, v);
      break;
  }
  write_whole_file(path, buf);
}

JotlTensor load_jotl(const std::string& path) {
  Reader r(path, read_whole_file(path));

  r.need(4, "magic");
  char magic[4];
  for (char& c : magic) c = static_cast<char>(r.u8("magic"));
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw JotlBadMagicError("bad magic in '" + path + "': not a JOTL file");
  }

  const std::uint16_t version = r.u16le("version");
  if (version != kVersion) {
    throw JotlUnsupportedError("unsupported JOTL version " + std::to_string(version) + " in '" +
                               path + "' (supported: 1)");
  }

  const std::uint8_t dtype_code = r.u8("dtype");
  if (dtype_code > 2) {
    throw JotlUnsupportedError("unsupported JOTL dtype code " + std::to_string(dtype_code) +
                               " in '" + path + "'");
  }
  JotlTensor tensor;
  tensor.dtype = static_cast<JotlDtype>(dtype_code);

  const std::uint8_t ndims = r.u8("ndims");
  tensor.dims.resize(ndims);
  for (std::uint8_t i = 0; i < ndims; ++i) tensor.dims[i] = r.u32le("dims");

  const std::size_t n = tensor.element_count();
  const std::size_t payload_bytes = n * jotl_dtype_size(tensor.dtype);
  if (r.remaining() != payload_bytes) {
    throw JotlTruncatedError("payload size mismatch in '" + path + "': expected " +
                             std::to_string(payload_bytes) + " bytes, have " +
                             std::to_string(r.remaining()));
  }

  switch (tensor.dtype) {
    case JotlDtype::complex64:
      tensor.cvalues.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double re = r.f32le("payload");
        const double im = r.f32le("payload");
        tensor.cvalues[i] = Complex(re, im);
      }
      break;
    case JotlDtype::complex128:
      tensor.cvalues.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double re = r.f64le("payload");
        const double im = r.f64le("payload");
        tensor.cvalues[i] = Complex(re, im);
      }
      break;
    case JotlDtype::real64:
      tensor.rvalues.resize(n);
      for (std::size_t i = 0; i < n; ++i) tensor.rvalues[i] = r.f64le("payload");
      break;
  }
  return tensor;
}

void save_image_jotl(const std::string& path, const DynamicImage& image) {
  JotlTensor t;
  t.dtype = JotlDtype::complex128;
  t.dims = {static_cast<std::uint32_t>(image.height()), static_cast<std::uint32_t>(image.width()),
            static_cast<std::uint32_t>(image.frames())};
  t.cvalues.assign(image.values().begin(), image.values().end());
  save_jotl(path, t);
}

DynamicImage load_image_jotl(const std::string& path) {
  JotlTensor t = load_jotl(path);
  if (t.dims.size() != 3) {
    throw IoError("'" + path + "' does not hold a 3-way tensor (ndims=" +
                  std::to_string(t.dims.size()) + ")");
  }
  if (t.dtype == JotlDtype::real64) {
    DynamicImage img(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]),
                     static_cast<int>(t.dims[2]));
    for (std::size_t i = 0; i < t.rvalues.size(); ++i) img.data()[i] = Complex(t.rvalues[i], 0.0);
    return img;
  }
  DynamicImage img(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]),
                   static_cast<int>(t.dims[2]));
  std::copy(t.cvalues.begin(), t.cvalues.end(), img.data());
  return img;
}

void export_frame_pgm(const DynamicImage& image, int frame, const std::string& path) {
  if (frame < 0 || frame >= image.frames()) {
    throw std::out_of_range("export_frame_pgm: frame index out of range");
  }
  const double peak = image.max_abs();
  std::string buf = "P5\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) +
                    "\n255\n";
  buf.reserve(buf.size() + static_cast<std::size_t>(image.height()) * image.width());
  for (int h = 0; h < image.height(); ++h) {
    for (int w = 0; w < image.width(); ++w) {
      double v = peak > 0.0 ? std::abs(image(h, w, frame)) / peak : 0.0;
      long scaled = std::lround(255.0 * v);
      scaled = std::clamp(scaled, 0L, 255L);
      buf.push_back(static_cast<char>(static_cast<unsigned char>(scaled)));
    }
  }
  write_whole_file(path, buf);
}

}  // namespace jotlas
