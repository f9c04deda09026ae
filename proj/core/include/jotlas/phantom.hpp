#pragma once

#include <cstdint>
#include <string>

#include "jotlas/acquisition.hpp"
#include "jotlas/tensor.hpp"

namespace jotlas {

enum class PhantomKind { moving_ellipses, lowrank_plus_sparse, static_scene };

PhantomKind phantom_kind_from_string(const std::string& name);
std::string to_string(PhantomKind kind);

struct PhantomSpec {
  int height = 128;
  int width = 128;
  int frames = 16;
  PhantomKind kind = PhantomKind::moving_ellipses;
  std::uint64_t seed = 0;
  double motion_amplitude = 4.0;  // pixels per cycle
  int n_ellipses = 5;             // ellipse count; dot count for lowrank-plus-sparse
};

/// Deterministic synthetic dynamic scene, normalized to max magnitude 1.
///   moving-ellipses:     smooth ellipses whose centers oscillate sinusoidally
///   lowrank-plus-sparse: Casorati-rank-3 background plus blinking dots
///   static:              a single frame replicated
DynamicImage make_phantom(const PhantomSpec& spec);

/// Smooth Gaussian-profile complex coil maps centered around the FOV border,
/// normalized so the squared magnitudes sum to one at every pixel.
CoilSensitivities make_synthetic_csm(int height, int width, int coils, std::uint64_t seed);

}  // namespace jotlas
