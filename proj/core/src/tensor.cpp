#include "jotlas/tensor.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace jotlas {

namespace {

void require_same_shape(const DynamicImage& x, const DynamicImage& y) {
  if (!x.same_shape(y)) {
    throw std::invalid_argument("tensor shape mismatch");
  }
}

using RowMajorXcd = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

DynamicImage::DynamicImage(int height, int width, int frames)
    : height_(height), width_(width), frames_(frames) {
  if (height <= 0 || width <= 0 || frames <= 0) {
    throw std::invalid_argument("DynamicImage dimensions must be positive");
  }
  data_.assign(static_cast<std::size_t>(height) * width * frames, Complex(0.0, 0.0));
}

CasoratiMap DynamicImage::casorati() const {
  return CasoratiMap(data_.data(), static_cast<Eigen::Index>(height_) * width_, frames_);
}

bool DynamicImage::all_finite() const {
  for (const Complex& v : data_) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  }
  return true;
}

double DynamicImage::frobenius_norm() const {
  double acc = 0.0;
  for (const Complex& v : data_) acc += std::norm(v);
  return std::sqrt(acc);
}

double DynamicImage::max_abs() const {
  double best = 0.0;
  for (const Complex& v : data_) best = std::max(best, std::abs(v));
  return best;
}

DynamicImage add(const DynamicImage& x, const DynamicImage& y) {
  require_same_shape(x, y);
  DynamicImage out = x;
  Complex* o = out.data();
  const Complex* b = y.data();
  for (std::size_t i = 0; i < out.size(); ++i) o[i] += b[i];
  return out;
}

DynamicImage sub(const DynamicImage& x, const DynamicImage& y) {
  require_same_shape(x, y);
  DynamicImage out = x;
  Complex* o = out.data();
  const Complex* b = y.data();
  for (std::size_t i = 0; i < out.size(); ++i) o[i] -= b[i];
  return out;
}

DynamicImage scaled(const DynamicImage& x, double a) {
  DynamicImage out = x;
  for (Complex& v : out.values()) v *= a;
  return out;
}

DynamicImage lincomb(double a, const DynamicImage& x, double b, const DynamicImage& y) {
  require_same_shape(x, y);
  DynamicImage out(x.height(), x.width(), x.frames());
  Complex* o = out.data();
  const Complex* p = x.data();
  const Complex* q = y.data();
  for (std::size_t i = 0; i < out.size(); ++i) o[i] = a * p[i] + b * q[i];
  return out;
}

void axpy(DynamicImage& y, double a, const DynamicImage& x) {
  require_same_shape(y, x);
  Complex* o = y.data();
  const Complex* p = x.data();
  for (std::size_t i = 0; i < y.size(); ++i) o[i] += a * p[i];
}

Complex inner(const DynamicImage& x, const DynamicImage& y) {
  require_same_shape(x, y);
  Complex acc(0.0, 0.0);
  const Complex* p = x.data();
  const Complex* q = y.data();
  for (std::size_t i = 0; i < x.size(); ++i) acc += std::conj(p[i]) * q[i];
  return acc;
}

TransformKind transform_kind_from_string(const std::string& name) {
  if (name == "identity") return TransformKind::identity;
  if (name == "dft") return TransformKind::dft_mode3;
  if (name == "dct") return TransformKind::dct_mode3;
  throw std::invalid_argument("unknown transform kind '" + name +
                              "' (allowed: identity, dft, dct)");
}

std::string to_string(TransformKind kind) {
  switch (kind) {
    case TransformKind::identity: return "identity";
    case TransformKind::dft_mode3: return "dft";
    case TransformKind::dct_mode3: return "dct";
  }
  return "?";
}

Eigen::MatrixXcd mode3_transform_matrix(TransformKind kind, int frames) {
  const int n = frames;
  Eigen::MatrixXcd m(n, n);
  switch (kind) {
    case TransformKind::identity:
      m = Eigen::MatrixXcd::Identity(n, n);
      break;
    case TransformKind::dft_mode3: {
      const double scale = 1.0 / std::sqrt(static_cast<double>(n));
      for (int j = 0; j < n; ++j) {
        for (int k = 0; k < n; ++k) {
          const double phase = -2.0 * std::numbers::pi * static_cast<double>(j) * k / n;
          m(j, k) = scale * Complex(std::cos(phase), std::sin(phase));
        }
      }
      break;
    }
    case TransformKind::dct_mode3: {
      // Orthonormal DCT-II.
      const double c0 = std::sqrt(1.0 / n);
      const double cj = std::sqrt(2.0 / n);
      for (int j = 0; j < n; ++j) {
        for (int k = 0; k < n; ++k) {
          const double angle = std::numbers::pi * (2.0 * k + 1.0) * j / (2.0 * n);
          m(j, k) = Complex((j == 0 ? c0 : cj) * std::cos(angle), 0.0);
        }
      }
      break;
    }
  }
  return m;
}

namespace {

// Applies the frames x frames matrix b along mode 3: out(p,:) = b * x(p,:).
// With the pixels-by-frames unfolding X this is X * b^T, one GEMM.
DynamicImage apply_mode3_matrix(const DynamicImage& x, const Eigen::MatrixXcd& b) {
  DynamicImage out(x.height(), x.width(), x.frames());
  const Eigen::Index pixels = static_cast<Eigen::Index>(x.height()) * x.width();
  Eigen::Map<const RowMajorXcd> in(x.data(), pixels, x.frames());
  Eigen::Map<RowMajorXcd> result(out.data(), pixels, x.frames());
  result.noalias() = in * b.transpose();
  return out;
}

}  // namespace

DynamicImage transform_apply(const TransformSpec& spec, const DynamicImage& x) {
  if (spec.kind == TransformKind::identity) return x;
  return apply_mode3_matrix(x, mode3_transform_matrix(spec.kind, x.frames()));
}

DynamicImage transform_inverse(const TransformSpec& spec, const DynamicImage& y) {
  if (spec.kind == TransformKind::identity) return y;
  // The inverse of a unitary B applies B^H, i.e. X * conj(B) on the unfolding.
  const Eigen::MatrixXcd b = mode3_transform_matrix(spec.kind, y.frames());
  return apply_mode3_matrix(y, b.adjoint());
}

Eigen::MatrixXcd frontal_slice(const DynamicImage& x, int i) {
  if (i < 0 || i >= x.frames()) {
    throw std::out_of_range("frontal_slice: frame index " + std::to_string(i) +
                            " out of range [0, " + std::to_string(x.frames()) + ")");
  }
  Eigen::MatrixXcd slice(x.height(), x.width());
  for (int h = 0; h < x.height(); ++h) {
    for (int w = 0; w < x.width(); ++w) {
      slice(h, w) = x(h, w, i);
    }
  }
  return slice;
}

void set_frontal_slice(DynamicImage& x, int i, const Eigen::MatrixXcd& slice) {
  if (i < 0 || i >= x.frames()) {
    throw std::out_of_range("set_frontal_slice: frame index out of range");
  }
  if (slice.rows() != x.height() || slice.cols() != x.width()) {
    throw std::invalid_argument("set_frontal_slice: slice shape mismatch");
  }
  for (int h = 0; h < x.height(); ++h) {
    for (int w = 0; w < x.width(); ++w) {
      x(h, w, i) = slice(h, w);
    }
  }
}

}  // namespace jotlas
