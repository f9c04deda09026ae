#include "jotlas/prox.hpp"

#include <cmath>
#include <future>
#include <stdexcept>

#include "jotlas/errors.hpp"

namespace jotlas {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

ThresholdSpec::Mode threshold_mode_from_string(const std::string& name) {
  if (name == "absolute") return ThresholdSpec::Mode::absolute;
  if (name == "relative") return ThresholdSpec::Mode::sigma_max_relative;
  throw std::invalid_argument("unknown threshold mode '" + name +
                              "' (allowed: absolute, relative)");
}

std::string to_string(ThresholdSpec::Mode mode) {
  return mode == ThresholdSpec::Mode::absolute ? "absolute" : "relative";
}

AttentionParams AttentionParams::zero_fc(int channels) {
  AttentionParams p;
  p.mode = Mode::fc_attention;
  p.channels = channels;
  p.fc1_weights = Eigen::MatrixXd::Zero(channels, channels);
  p.fc1_bias = Eigen::VectorXd::Zero(channels);
  p.fc2_weights = Eigen::MatrixXd::Zero(channels, channels);
  p.fc2_bias = Eigen::VectorXd::Zero(channels);
  return p;
}

AttentionParams AttentionParams::energy(double alpha) {
  AttentionParams p;
  p.mode = Mode::energy_proportional;
  p.alpha = alpha;
  return p;
}

namespace {

void require_finite(const Eigen::MatrixXcd& m) {
  if (!m.allFinite()) {
    throw NumericalError("SVD input contains non-finite entries");
  }
}

// Shrinks the singular values of m. tau_of_sigma_max maps the largest
// singular value to the threshold, which covers both threshold modes.
template <typename TauFn>
Eigen::MatrixXcd svt_impl(const Eigen::MatrixXcd& m, TauFn tau_of_sigma_max) {
  require_finite(m);
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double tau = tau_of_sigma_max(sv.size() > 0 ? sv(0) : 0.0);
  Eigen::VectorXd shrunk = (sv.array() - tau).max(0.0);
  Eigen::Index rank = 0;
  while (rank < shrunk.size() && shrunk(rank) > 0.0) ++rank;
  if (rank == 0) {
    return Eigen::MatrixXcd::Zero(m.rows(), m.cols());
  }
  return svd.matrixU().leftCols(rank) * shrunk.head(rank).asDiagonal() *
         svd.matrixV().leftCols(rank).adjoint();
}

double slice_threshold(const ThresholdSpec& threshold, double omega, double sigma_max) {
  if (threshold.mode == ThresholdSpec::Mode::absolute) {
    return threshold.value / omega;
  }
  return sigmoid(threshold.value) * sigma_max / omega;
}

// Frontal slices are independent, so per-slice work may run concurrently;
// the result is identical either way. Small slices stay serial to avoid
// thread overhead.
bool parallel_slices(const DynamicImage& y) {
  return y.frames() > 1 && static_cast<std::size_t>(y.height()) * y.width() >= 4096;
}

}  // namespace

Eigen::MatrixXcd svt_matrix(const Eigen::MatrixXcd& m, double tau) {
  if (tau < 0.0) throw std::invalid_argument("svt_matrix needs tau >= 0");
  return svt_impl(m, [tau](double) { return tau; });
}

Eigen::VectorXd singular_values(const Eigen::MatrixXcd& m) {
  require_finite(m);
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(m);
  return svd.singularValues();
}

DynamicImage svt_tensor(const DynamicImage& x, const TransformSpec& transform,
                        const ThresholdSpec& threshold, double omega1) {
  if (omega1 <= 0.0) throw std::invalid_argument("svt_tensor needs omega1 > 0");
  if (threshold.mode == ThresholdSpec::Mode::absolute && threshold.value < 0.0) {
    throw std::invalid_argument("absolute threshold must be >= 0");
  }
  DynamicImage y = transform_apply(transform, x);
  const auto shrink_slice = [&](int t) {
    return svt_impl(frontal_slice(y, t), [&](double sigma_max) {
      return slice_threshold(threshold, omega1, sigma_max);
    });
  };
  if (parallel_slices(y)) {
    std::vector<std::future<Eigen::MatrixXcd>> slices;
    slices.reserve(static_cast<std::size_t>(y.frames()));
    for (int t = 0; t < y.frames(); ++t) {
      slices.push_back(std::async(std::launch::async, shrink_slice, t));
    }
    for (int t = 0; t < y.frames(); ++t) {
      set_frontal_slice(y, t, slices[static_cast<std::size_t>(t)].get());
    }
  } else {
    for (int t = 0; t < y.frames(); ++t) {
      set_frontal_slice(y, t, shrink_slice(t));
    }
  }
  return transform_inverse(transform, y);
}

double ttnn(const DynamicImage& x, const TransformSpec& transform) {
  const DynamicImage y = transform_apply(transform, x);
  const auto slice_sum = [&](int t) { return singular_values(frontal_slice(y, t)).sum(); };
  double acc = 0.0;
  if (parallel_slices(y)) {
    std::vector<std::future<double>> sums;
    sums.reserve(static_cast<std::size_t>(y.frames()));
    for (int t = 0; t < y.frames(); ++t) {
      sums.push_back(std::async(std::launch::async, slice_sum, t));
    }
    // fixed-order reduction keeps the value independent of task timing
    for (int t = 0; t < y.frames(); ++t) acc += sums[static_cast<std::size_t>(t)].get();
  } else {
    for (int t = 0; t < y.frames(); ++t) acc += slice_sum(t);
  }
  return acc;
}

Complex soft_threshold(Complex z, double tau) {
  const double mag = std::abs(z);
  if (mag <= tau) return Complex(0.0, 0.0);
  return z * (1.0 - tau / mag);
}

DynamicImage soft_threshold(const DynamicImage& x, double tau) {
  if (tau < 0.0) throw std::invalid_argument("soft_threshold needs tau >= 0");
  DynamicImage out = x;
  for (Complex& v : out.values()) v = soft_threshold(v, tau);
  return out;
}

std::vector<double> channel_mean_abs(const std::vector<DynamicImage>& channels) {
  std::vector<double> means;
  means.reserve(channels.size());
  for (const DynamicImage& ch : channels) {
    double acc = 0.0;
    for (const Complex& v : ch.values()) acc += std::abs(v);
    means.push_back(acc / static_cast<double>(ch.size()));
  }
  return means;
}

std::vector<double> ast_thresholds(const std::vector<double>& channel_means,
                                   const AttentionParams& params) {
  const int nc = static_cast<int>(channel_means.size());
  std::vector<double> taus(channel_means.size());
  if (params.mode == AttentionParams::Mode::energy_proportional) {
    for (int i = 0; i < nc; ++i) taus[i] = params.alpha * channel_means[i];
    return taus;
  }
  if (params.channels != nc) {
    throw std::invalid_argument("attention params expect " + std::to_string(params.channels) +
                                " channels, got " + std::to_string(nc));
  }
  if (params.fc1_weights.rows() != nc || params.fc1_weights.cols() != nc ||
      params.fc2_weights.rows() != nc || params.fc2_weights.cols() != nc ||
      params.fc1_bias.size() != nc || params.fc2_bias.size() != nc) {
    throw std::invalid_argument("attention fc layer shape mismatch");
  }
  Eigen::VectorXd f(nc);
  for (int i = 0; i < nc; ++i) f(i) = channel_means[i];
  Eigen::VectorXd hidden = (params.fc1_weights * f + params.fc1_bias).cwiseMax(0.0);
  Eigen::VectorXd logits = params.fc2_weights * hidden + params.fc2_bias;
  for (int i = 0; i < nc; ++i) taus[i] = sigmoid(logits(i)) * channel_means[i];
  return taus;
}

std::vector<DynamicImage> ast(const std::vector<DynamicImage>& channels,
                              const AttentionParams& params, double omega2) {
  if (omega2 <= 0.0) throw std::invalid_argument("ast needs omega2 > 0");
  if (channels.empty()) throw std::invalid_argument("ast needs at least one channel");
  for (const DynamicImage& ch : channels) {
    if (!ch.same_shape(channels.front())) {
      throw std::invalid_argument("ast: channel shape mismatch");
    }
  }
  const std::vector<double> taus = ast_thresholds(channel_mean_abs(channels), params);
  std::vector<DynamicImage> out;
  out.reserve(channels.size());
  for (std::size_t i = 0; i < channels.size(); ++i) {
    out.push_back(soft_threshold(channels[i], taus[i] / omega2));
  }
  return out;
}

double l1_norm(const DynamicImage& x) {
  double acc = 0.0;
  for (const Complex& v : x.values()) acc += std::abs(v);
  return acc;
}

}  // namespace jotlas
