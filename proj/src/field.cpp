#include "rmf/field.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>

namespace rmf {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

ScalarField::ScalarField(Backend backend) : backend_(std::move(backend)) {
  std::visit(Overloaded{
                 [](const SphereField& s) {
                   if (!s.center.allFinite()) throw std::invalid_argument("sphere center");
                 },
                 [](const PlaneField& p) {
                   if (!p.normal.allFinite() || p.normal.norm() == 0.0) {
                     throw std::invalid_argument("plane field needs a non-zero normal");
                   }
                 },
                 [](const EllipsoidField& e) {
                   if (!e.a.isApprox(e.a.transpose(), 1e-12)) {
                     throw std::invalid_argument("ellipsoid matrix must be symmetric");
                   }
                   Eigen::LLT<Mat3> llt(e.a);
                   if (llt.info() != Eigen::Success) {
                     throw std::invalid_argument("ellipsoid matrix must be positive definite");
                   }
                 },
                 [](const MlpField& m) {
                   if (m.net.input_dim() != 3 || m.net.output_dim() != 1 ||
                       m.net.output() != Mlp::Output::kIdentity) {
                     throw std::invalid_argument("mlp field must map R^3 -> R linearly");
                   }
                 },
             },
             backend_);
}

double ScalarField::eval(const Vec3& x) const {
  return std::visit(Overloaded{
                        [&](const SphereField& s) { return (x - s.center).norm(); },
                        [&](const PlaneField& p) { return p.normal.dot(x); },
                        [&](const EllipsoidField& e) { return std::sqrt(x.dot(e.a * x)); },
                        [&](const MlpField& m) {
                          Feature in(3);
                          in << x.x(), x.y(), x.z();
                          return m.net.forward(in)(0);
                        },
                    },
                    backend_);
}

Vec3 ScalarField::gradient(const Vec3& x) const {
  return std::visit(Overloaded{
                        [&](const SphereField& s) -> Vec3 {
                          const Vec3 r = x - s.center;
                          const double n = r.norm();
                          return n > 0.0 ? Vec3(r / n) : Vec3::Zero();
                        },
                        [&](const PlaneField& p) -> Vec3 { return p.normal; },
                        [&](const EllipsoidField& e) -> Vec3 {
                          const Vec3 ax = e.a * x;
                          const double m = std::sqrt(x.dot(ax));
                          return m > 0.0 ? Vec3(ax / m) : Vec3::Zero();
                        },
                        [&](const MlpField& m) -> Vec3 {
                          Feature in(3);
                          in << x.x(), x.y(), x.z();
                          Feature g(1);
                          g(0) = 1.0;
                          const Feature d = m.net.input_vjp(in, g);
                          return Vec3(d(0), d(1), d(2));
                        },
                    },
                    backend_);
}

Vec3 grad_fd(const ScalarField& field, const Vec3& x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("grad_fd step must be positive");
  Vec3 g;
  for (int i = 0; i < 3; ++i) {
    Vec3 xp = x;
    Vec3 xm = x;
    xp(i) += h;
    xm(i) -= h;
    g(i) = (field.eval(xp) - field.eval(xm)) / (2.0 * h);
  }
  return g;
}

IsoLevels::IsoLevels(std::vector<double> levels) : levels_(std::move(levels)) {
  if (levels_.empty()) throw std::invalid_argument("at least one iso-level required");
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    if (!std::isfinite(levels_[i])) throw std::invalid_argument("iso-levels must be finite");
    if (i > 0 && !(levels_[i] > levels_[i - 1])) {
      throw std::invalid_argument("iso-levels must be strictly increasing");
    }
  }
}

IsoLevels IsoLevels::uniform(int count, double lo, double hi) {
  if (count < 1) throw std::invalid_argument("level count must be >= 1");
  if (count == 1) return IsoLevels({lo});
  if (!(hi > lo)) throw std::invalid_argument("level range must satisfy lo < hi");
  std::vector<double> v(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) v[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (count - 1);
  return IsoLevels(std::move(v));
}

}  // namespace rmf
