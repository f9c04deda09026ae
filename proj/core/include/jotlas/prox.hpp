#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "jotlas/tensor.hpp"

namespace jotlas {

double sigmoid(double x);

/// How a singular-value threshold is produced. In absolute mode `value` is
/// the threshold itself; in sigma-max-relative mode `value` is an
/// unconstrained parameter fed through a sigmoid and scaled by the largest
/// singular value of each frontal slice.
struct ThresholdSpec {
  enum class Mode { absolute, sigma_max_relative };
  Mode mode = Mode::absolute;
  double value = 0.0;
};

ThresholdSpec::Mode threshold_mode_from_string(const std::string& name);
std::string to_string(ThresholdSpec::Mode mode);

/// Per-channel attention thresholds: tau_i = w_i * f_i where f_i is the mean
/// magnitude of channel i. In fc-attention mode the weights come from a
/// two-layer fully connected net with sigmoid output; energy-proportional
/// mode uses the constant weight alpha for every channel.
struct AttentionParams {
  enum class Mode { fc_attention, energy_proportional };
  Mode mode = Mode::energy_proportional;
  int channels = 1;
  double alpha = 1.0;
  Eigen::MatrixXd fc1_weights;
  Eigen::VectorXd fc1_bias;
  Eigen::MatrixXd fc2_weights;
  Eigen::VectorXd fc2_bias;

  /// fc-attention with all weights and biases zero (so every w_i = 1/2).
  static AttentionParams zero_fc(int channels);
  static AttentionParams energy(double alpha);
};

/// U * max(S - tau, 0) * V^H; the proximal map of tau * nuclear norm.
/// Throws NumericalError when the input contains non-finite entries.
Eigen::MatrixXcd svt_matrix(const Eigen::MatrixXcd& m, double tau);

/// Singular values of m, descending.
Eigen::VectorXd singular_values(const Eigen::MatrixXcd& m);

/// Transform along mode 3, SVT each frontal slice, transform back. The
/// per-slice threshold is value/omega1 (absolute) or
/// sigmoid(value)*sigma_max/omega1 (relative).
DynamicImage svt_tensor(const DynamicImage& x, const TransformSpec& transform,
                        const ThresholdSpec& threshold, double omega1);

/// Sum over frontal slices, in the transform domain, of matrix nuclear norms.
double ttnn(const DynamicImage& x, const TransformSpec& transform);

/// Complex soft thresholding with sign(0) = 0.
Complex soft_threshold(Complex z, double tau);
DynamicImage soft_threshold(const DynamicImage& x, double tau);

/// Mean magnitude per channel (global average pooling of |.|).
std::vector<double> channel_mean_abs(const std::vector<DynamicImage>& channels);

/// tau_i = w_i * f_i from the attention weights for the given channel means.
std::vector<double> ast_thresholds(const std::vector<double>& channel_means,
                                   const AttentionParams& params);

/// Attention-based soft thresholding: channel i is soft-thresholded with
/// tau_i / omega2.
std::vector<DynamicImage> ast(const std::vector<DynamicImage>& channels,
                              const AttentionParams& params, double omega2);

/// Sum of complex magnitudes of all entries.
double l1_norm(const DynamicImage& x);

}  // namespace jotlas
