#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jotlas/tensor.hpp"

namespace jotlas {

// JOTL tensor file layout, all little-endian:
//   magic   4 bytes "JOTL"
//   version u16 = 1
//   dtype   u8  (0 = complex64, 1 = complex128, 2 = real64)
//   ndims   u8
//   dims    ndims x u32
//   payload row-major (last dim fastest), interleaved re/im for complex

enum class JotlDtype : std::uint8_t { complex64 = 0, complex128 = 1, real64 = 2 };

std::size_t jotl_dtype_size(JotlDtype dtype);

/// In-memory form of a JOTL file. Complex payloads of either precision are
/// held in cvalues (complex64 values are exactly float-representable after a
/// load); real64 payloads are held in rvalues.
struct JotlTensor {
  JotlDtype dtype = JotlDtype::complex128;
  std::vector<std::uint32_t> dims;
  std::vector<Complex> cvalues;
  std::vector<double> rvalues;

  std::size_t element_count() const;
};

void save_jotl(const std::string& path, const JotlTensor& tensor);
JotlTensor load_jotl(const std::string& path);

/// DynamicImage round trip as complex128 with dims {H, W, T}.
void save_image_jotl(const std::string& path, const DynamicImage& image);
DynamicImage load_image_jotl(const std::string& path);

/// 8-bit binary PGM of the magnitude of frame t, scaled so the maximum
/// magnitude of the whole tensor maps to 255.
void export_frame_pgm(const DynamicImage& image, int frame, const std::string& path);

}  // namespace jotlas
