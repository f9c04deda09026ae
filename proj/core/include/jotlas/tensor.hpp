#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace jotlas {

using Complex = std::complex<double>;

using CasoratiMap =
    Eigen::Map<const Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

/// Complex 3-way tensor holding a dynamic image series, height x width x
/// frames. Storage is row-major with the frame index fastest, so the
/// temporal profile of a pixel is contiguous. Treated as an immutable value
/// once built; every operation below returns a new tensor.
class DynamicImage {
 public:
  DynamicImage() = default;
  DynamicImage(int height, int width, int frames);

  int height() const { return height_; }
  int width() const { return width_; }
  int frames() const { return frames_; }
  std::size_t size() const { return data_.size(); }
  bool same_shape(const DynamicImage& other) const {
    return height_ == other.height_ && width_ == other.width_ && frames_ == other.frames_;
  }

  std::size_t index(int h, int w, int t) const {
    return (static_cast<std::size_t>(h) * width_ + w) * frames_ + t;
  }

  Complex& operator()(int h, int w, int t) { return data_[index(h, w, t)]; }
  const Complex& operator()(int h, int w, int t) const { return data_[index(h, w, t)]; }

  Complex* data() { return data_.data(); }
  const Complex* data() const { return data_.data(); }
  std::span<Complex> values() { return data_; }
  std::span<const Complex> values() const { return data_; }

  /// Pixels-by-frames unfolding of the tensor (a view, no copy).
  CasoratiMap casorati() const;

  bool all_finite() const;
  double frobenius_norm() const;
  double max_abs() const;

 private:
  int height_ = 0;
  int width_ = 0;
  int frames_ = 0;
  std::vector<Complex> data_;
};

// Elementwise arithmetic. Shapes must match; mismatches throw
// std::invalid_argument.
DynamicImage add(const DynamicImage& x, const DynamicImage& y);
DynamicImage sub(const DynamicImage& x, const DynamicImage& y);
DynamicImage scaled(const DynamicImage& x, double a);
/// a*x + b*y
DynamicImage lincomb(double a, const DynamicImage& x, double b, const DynamicImage& y);
/// y += a*x
void axpy(DynamicImage& y, double a, const DynamicImage& x);
/// sum over voxels of conj(x) * y
Complex inner(const DynamicImage& x, const DynamicImage& y);

enum class TransformKind { identity, dft_mode3, dct_mode3 };

TransformKind transform_kind_from_string(const std::string& name);
std::string to_string(TransformKind kind);

/// Selects the unitary transform applied along the frame axis (mode 3).
/// All kinds preserve the Frobenius norm and invert exactly.
struct TransformSpec {
  TransformKind kind = TransformKind::identity;
};

/// The frames x frames unitary matrix realizing `kind` along mode 3.
Eigen::MatrixXcd mode3_transform_matrix(TransformKind kind, int frames);

DynamicImage transform_apply(const TransformSpec& spec, const DynamicImage& x);
DynamicImage transform_inverse(const TransformSpec& spec, const DynamicImage& y);

/// Frontal slice x(:,:,i) as an H x W matrix copy. Throws std::out_of_range
/// for an invalid frame index.
Eigen::MatrixXcd frontal_slice(const DynamicImage& x, int i);
void set_frontal_slice(DynamicImage& x, int i, const Eigen::MatrixXcd& slice);

}  // namespace jotlas
