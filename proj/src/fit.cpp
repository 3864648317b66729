#include "rmf/fit.hpp"

#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

#include "rmf/metrics.hpp"

namespace rmf {

void FitConfig::validate() const {
  if (iterations < 0) throw std::invalid_argument("fit: iterations must be >= 0");
  if (!(step > 0.0)) throw std::invalid_argument("fit: step size must be positive");
  if (!(step_growth >= 1.0)) throw std::invalid_argument("fit: step growth must be >= 1");
  if (max_backoffs < 0) throw std::invalid_argument("fit: max_backoffs must be >= 0");
  if (nv_poses < 0) throw std::invalid_argument("fit: nv_poses must be >= 0");
  if (!(yaw_min <= yaw_max)) throw std::invalid_argument("fit: yaw range is empty");
  if (cache_factor < 1) throw std::invalid_argument("fit: cache factor must be >= 1");
  render.validate();
}

TriPlaneScene CoarseModel::scene(const LatentCode& code) const {
  return TriPlaneScene(generator.generate(code), decoder, levels, field);
}

namespace {

void check_finite(const LossReport& r, int iteration) {
  if (std::isfinite(r.total)) return;
  std::ostringstream msg;
  msg << "non-finite loss at iteration " << iteration << ": pixel=" << r.recon_pixel
      << " perceptual=" << r.recon_perceptual << " id=" << r.recon_id << " nv=" << r.nv
      << " depth=" << r.depth_reg << " latent=" << r.latent_reg;
  throw NonFiniteLoss(msg.str());
}

void add_plugin_grad(const ImagePlugin& plugin, double weight, const Image& a, const Image& b,
                     std::vector<double>& grad) {
  if (!plugin || weight == 0.0) return;
  if (!plugin.grad) throw std::invalid_argument("fit: image plugins need a gradient");
  const std::vector<double> g = plugin.grad(a, b);
  if (g.size() != grad.size()) throw std::invalid_argument("fit: plugin gradient has wrong size");
  for (std::size_t i = 0; i < g.size(); ++i) grad[i] += weight * g[i];
}

void fill_recon(LossReport& r, const Image& rendered, const Image& target,
                const FitConfig& config) {
  const ReconComponents rc = recon_loss(rendered, target, config.perceptual, config.id);
  r.recon_pixel = rc.pixel;
  r.recon_perceptual = rc.perceptual;
  r.recon_id = rc.id;
}

std::vector<double> recon_grad(const Image& rendered, const Image& target,
                               const FitConfig& config) {
  std::vector<double> g = mse_grad(rendered, target);
  for (double& v : g) v *= config.weights.pixel;
  add_plugin_grad(config.perceptual, config.weights.perceptual, rendered, target, g);
  add_plugin_grad(config.id, config.weights.id, rendered, target, g);
  return g;
}

void check_target(const Image& target, const RenderOptions& options) {
  if (target.width != options.width || target.height != options.height) {
    throw std::invalid_argument("fit: target size does not match the render size");
  }
}

}  // namespace

FitTrace descend(std::vector<double>& params, const Objective& objective,
                 const FitConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  FitTrace trace;
  std::vector<double> grad;
  LossReport current = objective(params, &grad);
  check_finite(current, 0);
  trace.initial = current;
  trace.reports.reserve(static_cast<std::size_t>(config.iterations));

  double step = config.step;
  std::vector<double> trial(params.size());
  std::vector<double> trial_grad;
  for (int it = 0; it < config.iterations; ++it) {
    bool accepted = false;
    for (int b = 0; b <= config.max_backoffs; ++b) {
      for (std::size_t i = 0; i < params.size(); ++i) trial[i] = params[i] - step * grad[i];
      const LossReport r = objective(trial, &trial_grad);
      check_finite(r, it + 1);
      if (r.total <= current.total) {
        params.swap(trial);
        grad.swap(trial_grad);
        current = r;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (accepted) step *= config.step_growth;
    trace.reports.push_back(current);
  }
  trace.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return trace;
}

std::vector<double> grad_fd_oracle(const std::function<double(std::span<const double>)>& f,
                                   std::span<const double> params, double h,
                                   std::span<const std::size_t> coords) {
  if (!(h > 0.0)) throw std::invalid_argument("grad_fd_oracle: h must be positive");
  std::vector<double> p(params.begin(), params.end());
  std::vector<std::size_t> which(coords.begin(), coords.end());
  if (which.empty()) {
    which.resize(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) which[i] = i;
  }
  std::vector<double> g(which.size());
  for (std::size_t k = 0; k < which.size(); ++k) {
    const std::size_t i = which[k];
    const double x = p[i];
    p[i] = x + h;
    const double fp = f(p);
    p[i] = x - h;
    const double fm = f(p);
    p[i] = x;
    g[k] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Latent stage

LatentObjective::LatentObjective(const CoarseModel& model, const Camera& camera_in,
                                 const Image& target, const FitConfig& config, LatentCode mean)
    : model_(model), camera_(camera_in), target_(target), config_(config), mean_(std::move(mean)) {
  config_.validate();
  check_target(target_, config_.render);
  hits_ = render_intersections(model_.scene(mean_), camera_, config_.render);
}

std::vector<double> LatentObjective::flatten(const LatentCode& code) {
  std::vector<double> out(static_cast<std::size_t>(code.w.size()));
  for (int l = 0; l < code.layers(); ++l) {
    for (int k = 0; k < code.dim(); ++k) out[static_cast<std::size_t>(l) * code.dim() + k] = code.w(l, k);
  }
  return out;
}

LatentCode LatentObjective::unflatten(std::span<const double> code) const {
  if (code.size() != static_cast<std::size_t>(mean_.w.size())) {
    throw std::invalid_argument("latent code has the wrong number of entries");
  }
  LatentCode c = LatentCode::zeros(mean_.layers(), mean_.dim());
  for (int l = 0; l < c.layers(); ++l) {
    for (int k = 0; k < c.dim(); ++k) c.w(l, k) = code[static_cast<std::size_t>(l) * c.dim() + k];
  }
  return c;
}

LossReport LatentObjective::evaluate(std::span<const double> code,
                                     std::vector<double>* grad) const {
  const LatentCode c = unflatten(code);
  const TriPlaneScene scene = model_.scene(c);
  const ShadedImage shaded = shade(scene, camera_, hits_, nullptr, config_.render);
  const GBuffer g = composite_image(shaded, camera_, config_.render);

  LossReport r;
  r.weights = config_.weights;
  fill_recon(r, g.color, target_, config_);
  r.latent_reg = latent_reg(c, mean_);
  r.sum();
  if (!grad) return r;

  const std::vector<double> gcolor = recon_grad(g.color, target_, config_);
  const auto ginputs = shade_backward(shaded, scene.decoder, gcolor, config_.render);
  std::vector<double> gplanes(scene.planes.data.size(), 0.0);
  scatter_to_planes(scene.planes, shaded, ginputs, gplanes);
  LatentCode gl = model_.generator.backprop(gplanes);
  gl.w += 2.0 * config_.weights.latent * (c.w - mean_.w);
  *grad = flatten(gl);
  return r;
}

LatentFit fit_latent(const Image& target, const Camera& camera_in, const CoarseModel& model,
                     const FitConfig& config) {
  const LatentObjective objective(model, camera_in, target, config,
                                  model.generator.mean_code(10000));
  std::vector<double> params = LatentObjective::flatten(objective.mean());
  LatentFit out;
  out.trace = descend(
      params,
      [&](std::span<const double> p, std::vector<double>* g) { return objective.evaluate(p, g); },
      config);
  out.code = objective.unflatten(params);
  const GBuffer final_render = render(model.scene(out.code), camera_in, config.render);
  out.trace.final_psnr = psnr(final_render.color, target);
  return out;
}

// ---------------------------------------------------------------------------
// Detail stage

std::vector<double> sample_yaws(const FitConfig& config) {
  std::mt19937_64 rng(config.seed);
  std::vector<double> yaws(static_cast<std::size_t>(config.nv_poses));
  for (double& y : yaws) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    y = config.yaw_min + u * (config.yaw_max - config.yaw_min);
  }
  return yaws;
}

namespace {

DetailVoxel shaped_voxel(const DetailVoxel& shape, const Camera& camera_in,
                         const RenderOptions& options) {
  return DetailVoxel::zeros(camera_in, static_cast<double>(options.width) / options.height,
                            shape.height, shape.width, shape.depth, shape.channels);
}

GBuffer coarse_with_normals(const TriPlaneScene& scene, const Camera& camera,
                            const IntersectionSet& hits, RenderOptions options) {
  options.normals = true;
  return composite_image(shade(scene, camera, hits, nullptr, options), camera, options);
}

void scatter_hits(const ShadedImage& shaded, const std::vector<std::vector<Feature>>& grads,
                  const Camera& camera_in, std::vector<ManifoldFeatureMap>& grad_hr) {
  for (std::size_t p = 0; p < shaded.pixels.size(); ++p) {
    for (std::size_t k = 0; k < shaded.pixels[p].size(); ++k) {
      const ShadedHit& h = shaded.pixels[p][k];
      if (h.level >= static_cast<int>(grad_hr.size())) continue;
      reproject_scatter(grad_hr, camera_in, h.point, h.level, grads[p][k]);
    }
  }
}

}  // namespace

DetailObjective::DetailObjective(const TriPlaneScene& coarse, const Camera& camera_in,
                                 const Image& target, const FitConfig& config,
                                 const DetailVoxel& shape)
    : coarse_(coarse), camera_(camera_in), target_(target), config_(config) {
  config_.validate();
  check_target(target_, config_.render);
  shape_ = shaped_voxel(shape, camera_, config_.render);
  if (shape_.channels != coarse_.channels()) {
    throw std::invalid_argument("detail voxel channels must match the tri-plane channels");
  }
  epsilon_ = config_.epsilon < 0.0 ? shape_.slab_width() : config_.epsilon;
  const RenderOptions& ro = config_.render;
  cache_ = cache_manifolds(coarse_, camera_, ro.width, ro.height, config_.cache_factor, ro.solver);
  hits_in_ = render_intersections(coarse_, camera_, ro);
  coarse_in_ = composite_image(shade(coarse_, camera_, hits_in_, nullptr, ro), camera_, ro);
  for (double yaw : sample_yaws(config_)) {
    const Camera cam = orbit_about(camera_, config_.pivot, yaw);
    IntersectionSet hits = render_intersections(coarse_, cam, ro);
    GBuffer g = coarse_with_normals(coarse_, cam, hits, ro);
    masks_.push_back(nv_mask(g.normal, g.degenerate, camera_.lookat(), config_.tau));
    novel_.push_back(cam);
    hits_nv_.push_back(std::move(hits));
    coarse_nv_.push_back(std::move(g));
  }
}

DetailVoxel DetailObjective::voxel_from(std::span<const double> values) const {
  if (values.size() != shape_.data.size()) {
    throw std::invalid_argument("detail voxel parameter count does not match its shape");
  }
  DetailVoxel v = shape_;
  v.data.assign(values.begin(), values.end());
  return v;
}

LossReport DetailObjective::evaluate(std::span<const double> values,
                                     std::vector<double>* grad) const {
  const DetailVoxel voxel = voxel_from(values);
  const DetailManifolds detail = build_detail(voxel, cache_, config_.upsample);
  const RenderOptions& ro = config_.render;

  const ShadedImage shaded = shade(coarse_, camera_, hits_in_, &detail, ro);
  const GBuffer g = composite_image(shaded, camera_, ro);
  std::vector<std::vector<Feature>> details(shaded.pixels.size());
  for (std::size_t p = 0; p < shaded.pixels.size(); ++p) {
    for (const ShadedHit& h : shaded.pixels[p]) details[p].push_back(detail.at(h.point, h.level));
  }

  LossReport r;
  r.weights = config_.weights;
  fill_recon(r, g.color, target_, config_);
  r.depth_reg = depth_reg(shaded, details, coarse_in_.z_surf, epsilon_, config_.weights.depth);

  const std::size_t views = novel_.size();
  std::vector<ShadedImage> shaded_nv;
  std::vector<GBuffer> final_nv;
  for (std::size_t k = 0; k < views; ++k) {
    shaded_nv.push_back(shade(coarse_, novel_[k], hits_nv_[k], &detail, ro));
    final_nv.push_back(composite_image(shaded_nv.back(), novel_[k], ro));
    r.nv += nv_loss(final_nv.back().color, coarse_nv_[k].color, masks_[k]);
  }
  if (views > 0) r.nv /= static_cast<double>(views);
  r.sum();
  if (!grad) return r;

  std::vector<ManifoldFeatureMap> grad_hr = zero_highres_grads(detail);
  auto ginputs = shade_backward(shaded, coarse_.decoder, recon_grad(g.color, target_, config_), ro);
  const double two_lambda = 2.0 * config_.weights.depth;
  for (std::size_t p = 0; p < shaded.pixels.size(); ++p) {
    for (std::size_t k = 0; k < shaded.pixels[p].size(); ++k) {
      if (std::abs(shaded.pixels[p][k].depth - coarse_in_.z_surf[p]) > epsilon_) {
        ginputs[p][k] += two_lambda * details[p][k];
      }
    }
  }
  scatter_hits(shaded, ginputs, camera_, grad_hr);
  for (std::size_t k = 0; k < views; ++k) {
    std::vector<double> gcolor = nv_loss_grad(final_nv[k].color, coarse_nv_[k].color, masks_[k]);
    const double scale = config_.weights.nv / static_cast<double>(views);
    for (double& v : gcolor) v *= scale;
    scatter_hits(shaded_nv[k], shade_backward(shaded_nv[k], coarse_.decoder, gcolor, ro), camera_,
                 grad_hr);
  }
  grad->assign(values.size(), 0.0);
  highres_backward(voxel, cache_, config_.upsample, detail, grad_hr, *grad);
  return r;
}

DetailFit fit_detail(const Image& target, const Camera& camera_in, const TriPlaneScene& coarse,
                     const FitConfig& config, const DetailVoxel& shape) {
  const DetailObjective objective(coarse, camera_in, target, config, shape);
  std::vector<double> params(objective.parameter_count(), 0.0);
  DetailFit out;
  out.trace = descend(
      params,
      [&](std::span<const double> p, std::vector<double>* g) { return objective.evaluate(p, g); },
      config);
  out.voxel = objective.voxel_from(params);
  const DetailManifolds detail = build_detail(out.voxel, objective.cache(), config.upsample);
  const GBuffer final_render = render(coarse, camera_in, config.render, &detail);
  out.trace.final_psnr = psnr(final_render.color, target);
  return out;
}

double novel_view_divergence(const TriPlaneScene& coarse, const DetailVoxel& voxel,
                             const Camera& camera_in, const Camera& camera,
                             const FitConfig& config) {
  const RenderOptions& ro = config.render;
  const ManifoldCache cache =
      cache_manifolds(coarse, camera_in, ro.width, ro.height, config.cache_factor, ro.solver);
  const DetailManifolds detail = build_detail(voxel, cache, config.upsample);
  const IntersectionSet hits = render_intersections(coarse, camera, ro);
  const GBuffer base = coarse_with_normals(coarse, camera, hits, ro);
  const GBuffer final_render =
      composite_image(shade(coarse, camera, hits, &detail, ro), camera, ro);
  const Mask mask = nv_mask(base.normal, base.degenerate, camera_in.lookat(), config.tau);
  return nv_loss(final_render.color, base.color, mask);
}

}  // namespace rmf
