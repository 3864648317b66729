#include "rmf/intersect.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "intersect_internal.hpp"

namespace rmf {

void SolverParams::validate() const {
  if (steps < 2) throw std::invalid_argument("solver needs at least 2 samples per ray");
  if (!(tol > 0.0)) throw std::invalid_argument("solver tolerance must be positive");
}

namespace {

constexpr int kMaxBisections = 64;

bool hit_before(const Hit& a, const Hit& b) {
  if (a.t != b.t) return a.t < b.t;
  if (a.level != b.level) return a.level < b.level;
  return a.crossing < b.crossing;
}

}  // namespace

HitList intersect_ray(const Ray& ray, const ScalarField& field, const IsoLevels& levels,
                      double near, double far, const SolverParams& params,
                      std::uint64_t* field_evals) {
  params.validate();
  if (!(near < far)) throw std::invalid_argument("intersect_ray requires near < far");

  const int n = params.steps;
  const double dt = (far - near) / (n - 1);
  std::vector<double> ts(static_cast<std::size_t>(n));
  std::vector<double> ms(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    ts[k] = k + 1 == n ? far : near + k * dt;
    ms[k] = field.eval(ray.at(ts[k]));
  }
  std::uint64_t evals = static_cast<std::uint64_t>(n);

  HitList hits;
  for (int i = 0; i < levels.size(); ++i) {
    const double level = levels[i];
    int crossing = 0;
    for (int k = 0; k + 1 < n; ++k) {
      const double ga = ms[k] - level;
      const double gb = ms[k + 1] - level;
      const bool lo_negative = ga < 0.0;
      if (lo_negative == (gb < 0.0)) continue;

      double lo = ts[k];
      double hi = ts[k + 1];
      double mid = 0.5 * (lo + hi);
      double residual = 0.0;
      for (int it = 0; it < kMaxBisections; ++it) {
        mid = 0.5 * (lo + hi);
        residual = field.eval(ray.at(mid)) - level;
        ++evals;
        if (std::abs(residual) <= params.tol && 0.5 * (hi - lo) <= params.tol) break;
        if ((residual < 0.0) == lo_negative) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      hits.push_back(Hit{ray.at(mid), mid, i, crossing++, std::abs(residual) <= params.tol});
    }
  }
  std::sort(hits.begin(), hits.end(), hit_before);
  if (field_evals) *field_evals += evals;
  return hits;
}

double lowres_ray_coordinate(int j, int lowres_size, int full_size) {
  if (lowres_size <= 1) return 0.5 * full_size;
  return 0.5 + static_cast<double>(static_cast<long long>(j) * (full_size - 1)) /
                   static_cast<double>(lowres_size - 1);
}

namespace internal {

int checked_lowres_size(int full, int factor) {
  if (factor < 1) throw std::invalid_argument("upsampling factor must be >= 1");
  if (full < 1) throw std::invalid_argument("image dimensions must be positive");
  if (full % factor != 0) {
    throw std::invalid_argument("upsampling factor must divide the image dimensions");
  }
  return full / factor;
}

HitList solve_lowres_ray(const Camera& camera, const ScalarField& field, const IsoLevels& levels,
                         int j, int k, int lr_width, int lr_height, int width, int height,
                         const SolverParams& params, std::uint64_t* evals) {
  const Ray ray = ray_through(camera, lowres_ray_coordinate(j, lr_width, width),
                             lowres_ray_coordinate(k, lr_height, height), width, height);
  return intersect_ray(ray, field, levels, camera.near, camera.far, params, evals);
}

namespace {

struct AxisTap {
  int i0 = 0;
  int i1 = 0;
  double frac = 0.0;
};

// Corner-aligned source coordinate of full-res pixel u on a lowres axis.
AxisTap axis_tap(int u, int lowres, int full) {
  AxisTap tap;
  if (lowres <= 1 || full <= 1) return tap;
  const double s = static_cast<double>(static_cast<long long>(u) * (lowres - 1)) /
                   static_cast<double>(full - 1);
  tap.i0 = std::min(static_cast<int>(std::floor(s)), lowres - 1);
  tap.frac = s - tap.i0;
  tap.i1 = tap.frac > 0.0 ? tap.i0 + 1 : tap.i0;
  return tap;
}

}  // namespace

HitList upsample_pixel(const IntersectionSet& lowres, const Camera& camera, int u, int v,
                       int width, int height) {
  const AxisTap tx = axis_tap(u, lowres.width, width);
  const AxisTap ty = axis_tap(v, lowres.height, height);

  struct Node {
    int x, y;
    double w;
  };
  std::array<Node, 4> nodes{};
  int count = 0;
  nodes[count++] = {tx.i0, ty.i0, (1.0 - tx.frac) * (1.0 - ty.frac)};
  if (tx.i1 != tx.i0) nodes[count++] = {tx.i1, ty.i0, tx.frac * (1.0 - ty.frac)};
  if (ty.i1 != ty.i0) nodes[count++] = {tx.i0, ty.i1, (1.0 - tx.frac) * ty.frac};
  if (tx.i1 != tx.i0 && ty.i1 != ty.i0) nodes[count++] = {tx.i1, ty.i1, tx.frac * ty.frac};

  // A pixel whose ray is one of the low-res rays reuses that solve verbatim.
  if (count == 1 &&
      lowres_ray_coordinate(tx.i0, lowres.width, width) == u + 0.5 &&
      lowres_ray_coordinate(ty.i0, lowres.height, height) == v + 0.5) {
    return lowres.at(tx.i0, ty.i0);
  }

  std::vector<std::pair<int, int>> slots;
  for (int n = 0; n < count; ++n) {
    for (const Hit& h : lowres.at(nodes[n].x, nodes[n].y)) slots.emplace_back(h.level, h.crossing);
  }
  std::sort(slots.begin(), slots.end());
  slots.erase(std::unique(slots.begin(), slots.end()), slots.end());

  const Ray ray = ray_for_pixel(camera, u, v, width, height);
  HitList out;
  out.reserve(slots.size());
  for (const auto& [level, crossing] : slots) {
    Vec3 sum = Vec3::Zero();
    double wsum = 0.0;
    int found = 0;
    bool all_valid = true;
    for (int n = 0; n < count; ++n) {
      for (const Hit& h : lowres.at(nodes[n].x, nodes[n].y)) {
        if (h.level != level || h.crossing != crossing) continue;
        sum += nodes[n].w * h.point;
        wsum += nodes[n].w;
        all_valid = all_valid && h.valid;
        ++found;
        break;
      }
    }
    Hit hit;
    hit.level = level;
    hit.crossing = crossing;
    hit.valid = all_valid && found == count;
    hit.point = hit.valid ? sum : Vec3(sum / wsum);
    hit.t = (hit.point - ray.origin).dot(ray.direction);
    if (hit.t < camera.near || hit.t > camera.far) hit.valid = false;
    out.push_back(hit);
  }
  std::sort(out.begin(), out.end(), hit_before);
  return out;
}

}  // namespace internal

IntersectionSet intersect_grid(const Camera& camera, const ScalarField& field,
                               const IsoLevels& levels, int width, int height,
                               const SolverParams& params) {
  if (width < 1 || height < 1) throw std::invalid_argument("image dimensions must be positive");
  camera.validate();
  params.validate();
  IntersectionSet set;
  set.width = width;
  set.height = height;
  set.rays.resize(static_cast<std::size_t>(width) * height);
  const long long total = static_cast<long long>(width) * height;
  std::uint64_t evals = 0;
#pragma omp parallel for schedule(dynamic, 16) reduction(+ : evals)
  for (long long idx = 0; idx < total; ++idx) {
    const int u = static_cast<int>(idx % width);
    const int v = static_cast<int>(idx / width);
    std::uint64_t local = 0;
    set.rays[idx] = intersect_ray(ray_for_pixel(camera, u, v, width, height), field, levels,
                                  camera.near, camera.far, params, &local);
    evals += local;
  }
  set.field_evals = evals;
  return set;
}

IntersectionSet intersect_lowres_grid(const Camera& camera, const ScalarField& field,
                                      const IsoLevels& levels, int width, int height,
                                      int factor, const SolverParams& params) {
  const int lw = internal::checked_lowres_size(width, factor);
  const int lh = internal::checked_lowres_size(height, factor);
  camera.validate();
  params.validate();
  IntersectionSet set;
  set.width = lw;
  set.height = lh;
  set.rays.resize(static_cast<std::size_t>(lw) * lh);
  const long long total = static_cast<long long>(lw) * lh;
  std::uint64_t evals = 0;
#pragma omp parallel for schedule(dynamic, 16) reduction(+ : evals)
  for (long long idx = 0; idx < total; ++idx) {
    std::uint64_t local = 0;
    set.rays[idx] = internal::solve_lowres_ray(camera, field, levels, static_cast<int>(idx % lw),
                                               static_cast<int>(idx / lw), lw, lh, width, height,
                                               params, &local);
    evals += local;
  }
  set.field_evals = evals;
  return set;
}

IntersectionSet upsample_intersections(const IntersectionSet& lowres, const Camera& camera,
                                       int width, int height) {
  if (width < 1 || height < 1) throw std::invalid_argument("image dimensions must be positive");
  IntersectionSet set;
  set.width = width;
  set.height = height;
  set.rays.resize(static_cast<std::size_t>(width) * height);
  set.field_evals = lowres.field_evals;
  const long long total = static_cast<long long>(width) * height;
#pragma omp parallel for schedule(dynamic, 64)
  for (long long idx = 0; idx < total; ++idx) {
    set.rays[idx] = internal::upsample_pixel(lowres, camera, static_cast<int>(idx % width),
                                             static_cast<int>(idx / width), width, height);
  }
  return set;
}

IntersectionSet intersect_lowres_upsample(const Camera& camera, const ScalarField& field,
                                          const IsoLevels& levels, int width, int height,
                                          int factor, const SolverParams& params) {
  const IntersectionSet lowres =
      intersect_lowres_grid(camera, field, levels, width, height, factor, params);
  return upsample_intersections(lowres, camera, width, height);
}

}  // namespace rmf
