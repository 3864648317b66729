#pragma once

#include <cstdint>
#include <vector>

#include "rmf/field.hpp"
#include "rmf/geometry.hpp"

namespace rmf {

struct Hit {
  Vec3 point;
  double t = 0.0;    // ray parameter (unit direction, so world distance)
  int level = 0;     // index into IsoLevels
  int crossing = 0;  // ordinal of this root among the roots of `level`, near to far
  bool valid = true;
};

using HitList = std::vector<Hit>;

struct SolverParams {
  int steps = 64;     // uniform samples of M along [near, far]
  double tol = 1e-6;  // residual |M(x) - l| and half-bracket width in t

  void validate() const;
};

// One hit list per pixel ray, row-major.
struct IntersectionSet {
  int width = 0;
  int height = 0;
  std::vector<HitList> rays;
  std::uint64_t field_evals = 0;

  const HitList& at(int u, int v) const {
    return rays[static_cast<std::size_t>(v) * width + u];
  }
  HitList& at(int u, int v) { return rays[static_cast<std::size_t>(v) * width + u]; }
};

/// Roots of M(o + t d) = l_i for every level within [near, far], sorted by t.
/// Sign changes between consecutive samples are refined by bisection until
/// both the residual and the half-bracket width are within tol, or 64
/// iterations pass; a hit whose residual still exceeds tol is marked invalid.
/// Roots closer together than one sample spacing can be missed.
HitList intersect_ray(const Ray& ray, const ScalarField& field, const IsoLevels& levels,
                      double near, double far, const SolverParams& params,
                      std::uint64_t* field_evals = nullptr);

/// intersect_ray over every pixel center of a width x height image.
IntersectionSet intersect_grid(const Camera& camera, const ScalarField& field,
                               const IsoLevels& levels, int width, int height,
                               const SolverParams& params = {});

/// Solves on a (width/factor) x (height/factor) ray grid, then bilinearly
/// interpolates the intersection points of each (level, crossing) pair up to
/// width x height. Throws std::invalid_argument if factor does not divide
/// both dimensions.
IntersectionSet intersect_lowres_upsample(const Camera& camera, const ScalarField& field,
                                          const IsoLevels& levels, int width, int height,
                                          int factor, const SolverParams& params = {});

// The low-resolution ray grid is corner-aligned with the full-resolution
// pixel grid: low-res ray j passes through full-res pixel coordinate
// 0.5 + j * (full - 1) / (lowres - 1), so the corner rays coincide with the
// corner pixel rays.
double lowres_ray_coordinate(int j, int lowres_size, int full_size);

/// The low-resolution grid solve on its own.
IntersectionSet intersect_lowres_grid(const Camera& camera, const ScalarField& field,
                                      const IsoLevels& levels, int width, int height,
                                      int factor, const SolverParams& params = {});

/// Bilinear upsampling of a low-resolution grid solve onto width x height.
/// A (level, crossing) slot missing or invalid at any contributing low-res
/// neighbor yields an invalid hit.
IntersectionSet upsample_intersections(const IntersectionSet& lowres, const Camera& camera,
                                       int width, int height);

}  // namespace rmf
