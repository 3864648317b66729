// rmf: render, fit and inspect radiance-manifold scenes from a JSON config.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rmf/cache.hpp"
#include "rmf/config.hpp"
#include "rmf/detail.hpp"
#include "rmf/fit.hpp"
#include "rmf/image.hpp"
#include "rmf/intersect.hpp"
#include "rmf/metrics.hpp"
#include "rmf/render.hpp"
#include "rmf/tensor_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rmf;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitIo = 2;
constexpr int kExitNonFinite = 3;

struct CommonArgs {
  std::string config;
  std::string out;
  std::string pose;
  int factor = 0;
  bool exact = false;
  std::string detail;
  bool count_evals = false;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* app, CommonArgs& a) {
  app->add_option("--config", a.config, "scene config (JSON)")->required();
  app->add_option("--out", a.out, "output path")->required();
  app->add_option("--pose", a.pose, "camera pose override: yaw,pitch,roll in radians");
  app->add_option("--factor", a.factor, "low-resolution intersection factor");
  app->add_flag("--exact", a.exact, "solve intersections at every pixel");
  app->add_option("--detail", a.detail, "detail voxel blob");
  app->add_flag("--count-evals", a.count_evals, "print scalar-field evaluation counts");
  app->add_option("--seed", a.seed, "override the config seed");
}

std::optional<Vec3> parse_pose(const std::string& s) {
  if (s.empty()) return std::nullopt;
  std::vector<double> v;
  std::stringstream in(s);
  std::string part;
  while (std::getline(in, part, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw ConfigError("--pose: cannot parse '" + part + "'");
    }
  }
  if (v.size() != 3) throw ConfigError("--pose needs yaw,pitch,roll");
  return Vec3(v[0], v[1], v[2]);
}

std::vector<double> parse_list(const std::string& s, const char* flag) {
  std::vector<double> v;
  std::stringstream in(s);
  std::string part;
  while (std::getline(in, part, ',')) {
    try {
      v.push_back(std::stod(part));
    } catch (const std::exception&) {
      throw ConfigError(std::string(flag) + ": cannot parse '" + part + "'");
    }
  }
  return v;
}

SceneConfig load_with_overrides(const CommonArgs& a) {
  SceneConfig c = load_config(a.config);
  if (a.seed) {
    c.seed = *a.seed;
    c.fit.seed = *a.seed;
  }
  if (a.exact && a.factor > 0) throw ConfigError("--exact and --factor are exclusive");
  if (a.exact) c.render.mode = IntersectMode::kExact;
  if (a.factor > 0) {
    c.render.mode = IntersectMode::kLowres;
    c.render.factor = a.factor;
  }
  try {
    c.render.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  c.fit.render = c.render;
  return c;
}

void report_evals(const CommonArgs& a, std::uint64_t evals) {
  if (a.count_evals) std::cout << "field_evals " << evals << "\n";
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << "\n";
  if (!out) throw IoError("failed writing " + path.string());
}

json report_json(const LossReport& r) {
  return {{"recon_pixel", r.recon_pixel}, {"recon_perceptual", r.recon_perceptual},
          {"recon_id", r.recon_id},       {"nv", r.nv},
          {"depth_reg", r.depth_reg},     {"latent_reg", r.latent_reg},
          {"total", r.total}};
}

json trace_json(const std::string& stage, const FitTrace& t) {
  json reports = json::array();
  for (const LossReport& r : t.reports) reports.push_back(report_json(r));
  const LossReport& last = t.reports.empty() ? t.initial : t.reports.back();
  return {{"stage", stage},
          {"iterations", t.reports.size()},
          {"initial", report_json(t.initial)},
          {"final", report_json(last)},
          {"final_psnr", t.final_psnr},
          {"reports", reports}};
}

int cmd_render(const CommonArgs& a, const std::string& gbuffer_dir, bool normals) {
  SceneConfig c = load_with_overrides(a);
  c.render.normals = normals;
  const TriPlaneScene scene = build_scene(c);
  const auto detail = build_detail_from_config(c, scene, a.detail);
  const Camera camera = build_camera(c, parse_pose(a.pose));
  const GBuffer g = render(scene, camera, c.render, detail ? &*detail : nullptr);
  write_image(a.out, g.color);
  if (!gbuffer_dir.empty()) {
    fs::create_directories(gbuffer_dir);
    Tensor depth;
    depth.shape = {g.height, g.width};
    depth.data = g.z_surf;
    depth.meta = {{"kind", "z_surf"}};
    write_tensor(fs::path(gbuffer_dir) / "z_surf.bin", depth);
    Tensor residual;
    residual.shape = {g.height, g.width};
    residual.data = g.residual;
    residual.meta = {{"kind", "residual"}};
    write_tensor(fs::path(gbuffer_dir) / "residual.bin", residual);
    if (normals) {
      Tensor n;
      n.shape = {g.height, g.width, 3};
      for (const Vec3& v : g.normal) n.data.insert(n.data.end(), {v.x(), v.y(), v.z()});
      n.meta = {{"kind", "normal"}};
      write_tensor(fs::path(gbuffer_dir) / "normal.bin", n);
    }
  }
  report_evals(a, g.field_evals);
  return kExitOk;
}

int cmd_fit(const CommonArgs& a, const std::string& target_path, const std::string& stage) {
  SceneConfig c = load_with_overrides(a);
  const Image target = read_image(target_path);
  if (target.width != c.render.width || target.height != c.render.height) {
    throw ConfigError("target is " + std::to_string(target.width) + "x" +
                      std::to_string(target.height) + " but the config renders " +
                      std::to_string(c.render.width) + "x" + std::to_string(c.render.height));
  }
  const Camera camera = build_camera(c, parse_pose(a.pose));
  FitConfig fc = c.fit;
  fc.upsample = build_upsample(c);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  write_image(dir / "target.ppm", target);

  if (stage == "latent") {
    const CoarseModel model = build_model(c);
    const LatentFit fit = fit_latent(target, camera, model, fc);
    save_latent(dir / "latent.bin", fit.code);
    write_json(dir / "trace.json", trace_json(stage, fit.trace));
    const GBuffer g = render(model.scene(fit.code), camera, c.render);
    write_image(dir / "render.ppm", g.color);
    std::cerr << "fit latent: " << fit.trace.reports.size() << " iterations, psnr "
              << fit.trace.final_psnr << " dB, " << fit.trace.seconds << " s\n";
    return kExitOk;
  }
  if (stage == "detail") {
    const TriPlaneScene coarse = build_scene(c);
    const DetailVoxel shape =
        DetailVoxel::zeros(camera, static_cast<double>(c.render.width) / c.render.height,
                           c.detail.height, c.detail.width, c.detail.depth, c.detail.channels);
    const DetailFit fit = fit_detail(target, camera, coarse, fc, shape);
    save_voxel(dir / "voxel.bin", fit.voxel);
    write_json(dir / "trace.json", trace_json(stage, fit.trace));
    write_image(dir / "coarse.ppm", render(coarse, camera, c.render).color);
    const ManifoldCache cache = cache_manifolds(coarse, camera, c.render.width, c.render.height,
                                                fc.cache_factor, c.render.solver);
    const DetailManifolds detail = build_detail(fit.voxel, cache, fc.upsample);
    write_image(dir / "render.ppm", render(coarse, camera, c.render, &detail).color);
    std::cerr << "fit detail: " << fit.trace.reports.size() << " iterations, psnr "
              << fit.trace.final_psnr << " dB, " << fit.trace.seconds << " s\n";
    return kExitOk;
  }
  throw ConfigError("--stage must be 'latent' or 'detail'");
}

int cmd_strip(const CommonArgs& a, int frames, double yaw_step) {
  SceneConfig c = load_with_overrides(a);
  if (frames > 0) c.strip.frames = frames;
  if (!std::isnan(yaw_step)) c.strip.yaw_step = yaw_step;
  const TriPlaneScene scene = build_scene(c);
  const auto detail = build_detail_from_config(c, scene, a.detail);
  const Vec3 base =
      parse_pose(a.pose).value_or(Vec3(c.camera.yaw, c.camera.pitch, c.camera.roll));
  std::vector<Camera> trajectory;
  for (int k = 0; k < c.strip.frames; ++k) {
    trajectory.push_back(
        build_camera(c, Vec3(base.x() + k * c.strip.yaw_step, base.y(), base.z())));
  }
  Scanline line;
  line.row = c.strip.row < 0 ? c.render.height / 2 : c.strip.row;
  line.col_start = c.strip.col_start;
  line.col_end = c.strip.col_end < 0 ? c.render.width : c.strip.col_end;
  Image strip;
  try {
    strip = texture_strip(scene, trajectory, line, c.render, detail ? &*detail : nullptr);
  } catch (const std::out_of_range& e) {
    throw ConfigError(e.what());
  }
  write_image(a.out, strip);
  return kExitOk;
}

int cmd_dolly(const CommonArgs& a, const std::string& distances) {
  SceneConfig c = load_with_overrides(a);
  if (!distances.empty()) c.dolly.distances = parse_list(distances, "--distances");
  if (c.dolly.distances.empty()) throw ConfigError("dolly needs at least one distance");
  const TriPlaneScene scene = build_scene(c);
  const auto detail = build_detail_from_config(c, scene, a.detail);
  const Camera camera = build_camera(c, parse_pose(a.pose));
  const fs::path dir(a.out);
  fs::create_directories(dir);
  std::uint64_t evals = 0;
  for (std::size_t k = 0; k < c.dolly.distances.size(); ++k) {
    Camera cam;
    try {
      cam = dolly_zoom_camera(camera, c.dolly.distances[k], c.dolly.subject);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    const GBuffer g = render(scene, cam, c.render, detail ? &*detail : nullptr);
    char name[32];
    std::snprintf(name, sizeof name, "frame_%03zu.ppm", k);
    write_image(dir / name, g.color);
    evals += g.field_evals;
  }
  report_evals(a, evals);
  return kExitOk;
}

int cmd_metrics(const std::string& a_path, const std::string& b_path) {
  const Image a = read_image(a_path);
  const Image b = read_image(b_path);
  if (!a.same_shape(b)) throw ConfigError("metrics: images differ in size");
  const json j = {{"psnr", psnr(a, b)}, {"ssim", ssim(a, b)}};
  std::cout << j.dump() << "\n";
  return kExitOk;
}

// Quick structural checks that need no config.
int cmd_selftest() {
  int failures = 0;
  auto check = [&](const char* name, bool ok) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << "\n";
    if (!ok) ++failures;
  };

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<DepthSample> s(1 + trial % 16);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i].radiance.alpha = unit(rng);
      s[i].depth = static_cast<double>(i);
    }
    const CompositeResult r = composite(s);
    double sum = r.residual;
    for (double w : r.weights) sum += w;
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  check("composite weights sum to one", worst <= 1e-10);

  Camera intr;
  intr.near = 1.0;
  intr.far = 5.0;
  const Camera cam = orbit_camera(0.0, 0.0, 0.0, 3.0, Vec3::Zero(), intr);
  const ScalarField field = ScalarField::sphere(Vec3::Zero());
  const IsoLevels levels({0.5});
  const IntersectionSet hits = intersect_grid(cam, field, levels, 16, 16);
  double err = 0.0;
  for (const HitList& ray : hits.rays) {
    for (const Hit& h : ray) {
      if (h.valid) err = std::max(err, std::abs(h.point.norm() - 0.5));
    }
  }
  check("sphere hits lie on the level set", err <= 1e-6);

  const IntersectionSet lr = intersect_lowres_upsample(cam, field, levels, 16, 16, 1);
  bool same = lr.rays.size() == hits.rays.size();
  for (std::size_t i = 0; same && i < lr.rays.size(); ++i) {
    same = lr.rays[i].size() == hits.rays[i].size();
    for (std::size_t k = 0; same && k < lr.rays[i].size(); ++k) {
      same = lr.rays[i][k].t == hits.rays[i][k].t;
    }
  }
  check("factor 1 matches the exact solve", same);
  return failures == 0 ? kExitOk : kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Radiance-manifold renderer and fitter"};
  app.require_subcommand(1);

  CommonArgs render_args;
  std::string gbuffer_dir;
  bool normals = false;
  CLI::App* render_cmd = app.add_subcommand("render", "render a scene to PPM or PNG");
  add_common(render_cmd, render_args);
  render_cmd->add_option("--gbuffer", gbuffer_dir, "directory for z_surf/residual/normal dumps");
  render_cmd->add_flag("--normals", normals, "also compute the normal map (with --gbuffer)");

  CommonArgs fit_args;
  std::string target;
  std::string stage = "latent";
  CLI::App* fit_cmd = app.add_subcommand("fit", "fit a latent code or detail voxel to a target");
  add_common(fit_cmd, fit_args);
  fit_cmd->add_option("--target", target, "target image")->required();
  fit_cmd->add_option("--stage", stage, "latent | detail");

  CommonArgs strip_args;
  int frames = 0;
  double yaw_step = std::nan("");
  CLI::App* strip_cmd = app.add_subcommand("strip", "one scanline per pose along a yaw sweep");
  add_common(strip_cmd, strip_args);
  strip_cmd->add_option("--frames", frames, "number of poses");
  strip_cmd->add_option("--yaw-step", yaw_step, "yaw increment per pose");

  CommonArgs dolly_args;
  std::string distances;
  CLI::App* dolly_cmd = app.add_subcommand("dolly", "dolly-zoom sequence into an output directory");
  add_common(dolly_cmd, dolly_args);
  dolly_cmd->add_option("--distances", distances, "comma-separated subject distances");

  std::string image_a;
  std::string image_b;
  CLI::App* metrics_cmd = app.add_subcommand("metrics", "PSNR and SSIM between two images");
  metrics_cmd->add_option("a", image_a, "first image")->required();
  metrics_cmd->add_option("b", image_b, "second image")->required();

  CLI::App* selftest_cmd = app.add_subcommand("selftest", "run built-in sanity checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*render_cmd) return cmd_render(render_args, gbuffer_dir, normals);
    if (*fit_cmd) return cmd_fit(fit_args, target, stage);
    if (*strip_cmd) return cmd_strip(strip_args, frames, yaw_step);
    if (*dolly_cmd) return cmd_dolly(dolly_args, distances);
    if (*metrics_cmd) return cmd_metrics(image_a, image_b);
    if (*selftest_cmd) return cmd_selftest();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const NonFiniteLoss& e) {
    std::cerr << "fit diverged: " << e.what() << "\n";
    return kExitNonFinite;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitConfig;
}
