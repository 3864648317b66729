#pragma once

#include <variant>
#include <vector>

#include "rmf/mlp.hpp"
#include "rmf/types.hpp"

namespace rmf {

// Scalar field whose iso-surfaces are the surface manifolds.
struct SphereField {
  Vec3 center = Vec3::Zero();  // M(x) = |x - center|
};
struct PlaneField {
  Vec3 normal = Vec3::UnitZ();  // M(x) = n . x
};
struct EllipsoidField {
  Mat3 a = Mat3::Identity();  // M(x) = sqrt(x^T A x), A symmetric positive definite
};
struct MlpField {
  Mlp net;  // 3 -> ... -> 1, linear output
};

class ScalarField {
 public:
  using Backend = std::variant<SphereField, PlaneField, EllipsoidField, MlpField>;

  explicit ScalarField(Backend backend);

  static ScalarField sphere(const Vec3& center) { return ScalarField(SphereField{center}); }
  static ScalarField plane(const Vec3& normal) { return ScalarField(PlaneField{normal}); }
  static ScalarField ellipsoid(const Mat3& a) { return ScalarField(EllipsoidField{a}); }
  static ScalarField mlp(Mlp net) { return ScalarField(MlpField{std::move(net)}); }

  double eval(const Vec3& x) const;

  // Closed-form gradient (backprop for the MLP backend).
  Vec3 gradient(const Vec3& x) const;

  const Backend& backend() const { return backend_; }

 private:
  Backend backend_;
};

/// Central-difference gradient, one axis at a time.
Vec3 grad_fd(const ScalarField& field, const Vec3& x, double h);

// Strictly increasing list of iso-levels.
class IsoLevels {
 public:
  explicit IsoLevels(std::vector<double> levels);

  /// `count` levels evenly spaced over [lo, hi] (both ends included).
  static IsoLevels uniform(int count, double lo, double hi);

  int size() const { return static_cast<int>(levels_.size()); }
  double operator[](int i) const { return levels_[static_cast<std::size_t>(i)]; }
  const std::vector<double>& values() const { return levels_; }

 private:
  std::vector<double> levels_;
};

}  // namespace rmf
