#include "rmf/config.hpp"

#include <fstream>
#include <set>

#include "rmf/image.hpp"
#include "rmf/tensor_io.hpp"

namespace rmf {

using nlohmann::json;

namespace {

// Reads keys from one JSON object and rejects any it did not consume.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  template <class T>
  void get(const char* key, T& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where(key) + ": " + e.what());
    }
  }

  void get_vec3(const char* key, Vec3& out) {
    std::vector<double> v{out.x(), out.y(), out.z()};
    get(key, v);
    if (v.size() != 3) throw ConfigError(where(key) + " must have 3 entries");
    out = Vec3(v[0], v[1], v[2]);
  }

  void get_mat3(const char* key, Mat3& out) {
    std::vector<std::vector<double>> rows(3, std::vector<double>(3));
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) rows[r][c] = out(r, c);
    }
    get(key, rows);
    if (rows.size() != 3) throw ConfigError(where(key) + " must be 3x3");
    for (int r = 0; r < 3; ++r) {
      if (rows[r].size() != 3) throw ConfigError(where(key) + " must be 3x3");
      for (int c = 0; c < 3; ++c) out(r, c) = rows[r][c];
    }
  }

  Reader child(const char* key) {
    used_.insert(key);
    static const json empty = json::object();
    return Reader(j_.contains(key) ? j_.at(key) : empty, where(key));
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.count(key)) throw ConfigError("unknown key " + where(key.c_str()));
    }
  }

 private:
  std::string where(const char* key = nullptr) const {
    if (!key) return path_.empty() ? "config" : path_;
    return path_.empty() ? std::string(key) : path_ + "." + key;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json mat(const Mat3& m) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) rows.push_back(json::array({m(r, 0), m(r, 1), m(r, 2)}));
  return rows;
}

Projection parse_projection(const std::string& s) {
  if (s == "pinhole") return Projection::kPinhole;
  if (s == "orthographic") return Projection::kOrthographic;
  throw ConfigError("camera.mode must be 'pinhole' or 'orthographic', got '" + s + "'");
}

IntersectMode parse_mode(const std::string& s) {
  if (s == "exact") return IntersectMode::kExact;
  if (s == "lowres") return IntersectMode::kLowres;
  throw ConfigError("render.mode must be 'exact' or 'lowres', got '" + s + "'");
}

void read_fit(Reader r, FitConfig& f) {
  r.get("iterations", f.iterations);
  r.get("step", f.step);
  r.get("step_growth", f.step_growth);
  r.get("max_backoffs", f.max_backoffs);
  {
    Reader w = r.child("weights");
    w.get("pixel", f.weights.pixel);
    w.get("perceptual", f.weights.perceptual);
    w.get("id", f.weights.id);
    w.get("nv", f.weights.nv);
    w.get("depth", f.weights.depth);
    w.get("latent", f.weights.latent);
    w.finish();
  }
  r.get("tau", f.tau);
  r.get("epsilon", f.epsilon);
  r.get("nv_poses", f.nv_poses);
  r.get("yaw_min", f.yaw_min);
  r.get("yaw_max", f.yaw_max);
  r.get_vec3("pivot", f.pivot);
  r.get("seed", f.seed);
  r.get("cache_factor", f.cache_factor);
  r.finish();
}

}  // namespace

SceneConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
  SceneConfig c;
  c.base_dir = base_dir;
  Reader root(j, "");
  if (!root.has("version")) throw ConfigError("config is missing 'version'");
  root.get("version", c.version);
  if (c.version != kConfigVersion) {
    throw ConfigError("unsupported config version " + std::to_string(c.version));
  }
  root.get("seed", c.seed);
  {
    Reader r = root.child("field");
    r.get("type", c.field.type);
    r.get_vec3("center", c.field.center);
    r.get_vec3("normal", c.field.normal);
    r.get_mat3("matrix", c.field.matrix);
    r.get("hidden", c.field.hidden);
    r.get("seed", c.field.seed);
    r.get("gain", c.field.gain);
    r.get("weights", c.field.weights);
    r.finish();
  }
  {
    Reader r = root.child("levels");
    r.get("values", c.levels.values);
    r.get("count", c.levels.count);
    r.get("min", c.levels.min);
    r.get("max", c.levels.max);
    r.finish();
  }
  {
    Reader r = root.child("generator");
    r.get("resolution", c.generator.resolution);
    r.get("channels", c.generator.channels);
    r.get("extent", c.generator.extent);
    r.get("latent_layers", c.generator.latent_layers);
    r.get("latent_dim", c.generator.latent_dim);
    r.get("gain", c.generator.gain);
    r.get("seed", c.generator_seed);
    r.finish();
  }
  {
    Reader r = root.child("latent");
    r.get("mode", c.latent.mode);
    r.get("index", c.latent.index);
    r.get("file", c.latent.file);
    r.finish();
  }
  {
    Reader r = root.child("decoder");
    r.get("hidden", c.decoder.hidden);
    r.get("seed", c.decoder.seed);
    r.get("gain", c.decoder.gain);
    r.get("weights", c.decoder.weights);
    r.finish();
  }
  {
    Reader r = root.child("camera");
    std::string mode = c.camera.mode == Projection::kPinhole ? "pinhole" : "orthographic";
    r.get("mode", mode);
    c.camera.mode = parse_projection(mode);
    r.get("fov_y", c.camera.fov_y);
    r.get("near", c.camera.near);
    r.get("far", c.camera.far);
    r.get("ortho_half_height", c.camera.ortho_half_height);
    r.get("yaw", c.camera.yaw);
    r.get("pitch", c.camera.pitch);
    r.get("roll", c.camera.roll);
    r.get("radius", c.camera.radius);
    r.get_vec3("target", c.camera.target);
    r.finish();
  }
  {
    Reader r = root.child("render");
    r.get("width", c.render.width);
    r.get("height", c.render.height);
    std::string mode = c.render.mode == IntersectMode::kExact ? "exact" : "lowres";
    r.get("mode", mode);
    c.render.mode = parse_mode(mode);
    r.get("factor", c.render.factor);
    r.get("steps", c.render.solver.steps);
    r.get("tol", c.render.solver.tol);
    r.get_vec3("background", c.render.background);
    r.get("background_manifold", c.render.background_manifold);
    r.finish();
  }
  {
    Reader r = root.child("detail");
    r.get("file", c.detail.file);
    r.get("height", c.detail.height);
    r.get("width", c.detail.width);
    r.get("depth", c.detail.depth);
    r.get("channels", c.detail.channels);
    r.get("upsample", c.detail.upsample);
    r.get("conv_weights", c.detail.conv_weights);
    r.finish();
  }
  read_fit(root.child("fit"), c.fit);
  {
    Reader r = root.child("strip");
    r.get("row", c.strip.row);
    r.get("col_start", c.strip.col_start);
    r.get("col_end", c.strip.col_end);
    r.get("frames", c.strip.frames);
    r.get("yaw_step", c.strip.yaw_step);
    r.finish();
  }
  {
    Reader r = root.child("dolly");
    r.get("distances", c.dolly.distances);
    r.get_vec3("subject", c.dolly.subject);
    r.finish();
  }
  root.finish();
  c.fit.render = c.render;
  return c;
}

SceneConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  SceneConfig c = parse_config(j, path.parent_path());
  validate_config(c);
  return c;
}

json to_json(const SceneConfig& c) {
  json j;
  j["version"] = c.version;
  j["seed"] = c.seed;
  j["field"] = {{"type", c.field.type},     {"center", vec(c.field.center)},
                {"normal", vec(c.field.normal)}, {"matrix", mat(c.field.matrix)},
                {"hidden", c.field.hidden}, {"seed", c.field.seed},
                {"gain", c.field.gain},     {"weights", c.field.weights}};
  j["levels"] = {{"values", c.levels.values},
                 {"count", c.levels.count},
                 {"min", c.levels.min},
                 {"max", c.levels.max}};
  j["generator"] = {{"resolution", c.generator.resolution},
                    {"channels", c.generator.channels},
                    {"extent", c.generator.extent},
                    {"latent_layers", c.generator.latent_layers},
                    {"latent_dim", c.generator.latent_dim},
                    {"gain", c.generator.gain},
                    {"seed", c.generator_seed}};
  j["latent"] = {{"mode", c.latent.mode}, {"index", c.latent.index}, {"file", c.latent.file}};
  j["decoder"] = {{"hidden", c.decoder.hidden},
                  {"seed", c.decoder.seed},
                  {"gain", c.decoder.gain},
                  {"weights", c.decoder.weights}};
  j["camera"] = {{"mode", c.camera.mode == Projection::kPinhole ? "pinhole" : "orthographic"},
                 {"fov_y", c.camera.fov_y},
                 {"near", c.camera.near},
                 {"far", c.camera.far},
                 {"ortho_half_height", c.camera.ortho_half_height},
                 {"yaw", c.camera.yaw},
                 {"pitch", c.camera.pitch},
                 {"roll", c.camera.roll},
                 {"radius", c.camera.radius},
                 {"target", vec(c.camera.target)}};
  j["render"] = {{"width", c.render.width},
                 {"height", c.render.height},
                 {"mode", c.render.mode == IntersectMode::kExact ? "exact" : "lowres"},
                 {"factor", c.render.factor},
                 {"steps", c.render.solver.steps},
                 {"tol", c.render.solver.tol},
                 {"background", vec(c.render.background)},
                 {"background_manifold", c.render.background_manifold}};
  j["detail"] = {{"file", c.detail.file},         {"height", c.detail.height},
                 {"width", c.detail.width},       {"depth", c.detail.depth},
                 {"channels", c.detail.channels}, {"upsample", c.detail.upsample},
                 {"conv_weights", c.detail.conv_weights}};
  const FitConfig& f = c.fit;
  j["fit"] = {{"iterations", f.iterations},
              {"step", f.step},
              {"step_growth", f.step_growth},
              {"max_backoffs", f.max_backoffs},
              {"weights",
               {{"pixel", f.weights.pixel},
                {"perceptual", f.weights.perceptual},
                {"id", f.weights.id},
                {"nv", f.weights.nv},
                {"depth", f.weights.depth},
                {"latent", f.weights.latent}}},
              {"tau", f.tau},
              {"epsilon", f.epsilon},
              {"nv_poses", f.nv_poses},
              {"yaw_min", f.yaw_min},
              {"yaw_max", f.yaw_max},
              {"pivot", vec(f.pivot)},
              {"seed", f.seed},
              {"cache_factor", f.cache_factor}};
  j["strip"] = {{"row", c.strip.row},
                {"col_start", c.strip.col_start},
                {"col_end", c.strip.col_end},
                {"frames", c.strip.frames},
                {"yaw_step", c.strip.yaw_step}};
  j["dolly"] = {{"distances", c.dolly.distances}, {"subject", vec(c.dolly.subject)}};
  return j;
}

std::filesystem::path resolve(const SceneConfig& config, const std::string& file) {
  const std::filesystem::path p(file);
  return p.is_absolute() ? p : config.base_dir / p;
}

namespace {

void require_file(const SceneConfig& c, const std::string& file, const char* what) {
  if (file.empty()) return;
  const auto p = resolve(c, file);
  if (!std::filesystem::exists(p)) {
    throw ConfigError(std::string(what) + " file not found: " + p.string());
  }
  if (std::string(what).find("weights") != std::string::npos ||
      std::string(what) == "latent" || std::string(what) == "detail") {
    if (!std::filesystem::exists(descriptor_path(p))) {
      throw ConfigError(std::string(what) + " descriptor not found: " +
                        descriptor_path(p).string());
    }
  }
}

std::vector<int> with_ends(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> w{in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

}  // namespace

void validate_config(const SceneConfig& c) {
  require_file(c, c.field.weights, "field weights");
  require_file(c, c.decoder.weights, "decoder weights");
  if (c.latent.mode == "file") {
    if (c.latent.file.empty()) throw ConfigError("latent.mode 'file' needs latent.file");
    require_file(c, c.latent.file, "latent");
  } else if (c.latent.mode != "mean" && c.latent.mode != "sample") {
    throw ConfigError("latent.mode must be 'mean', 'sample' or 'file'");
  }
  require_file(c, c.detail.file, "detail");
  if (c.detail.upsample != "bilinear" && c.detail.upsample != "conv") {
    throw ConfigError("detail.upsample must be 'bilinear' or 'conv'");
  }
  if (c.detail.upsample == "conv") {
    if (c.detail.conv_weights.empty()) throw ConfigError("detail.upsample 'conv' needs conv_weights");
    require_file(c, c.detail.conv_weights, "conv weights");
  }
  if (c.strip.frames < 1) throw ConfigError("strip.frames must be >= 1");
  if (c.dolly.distances.empty()) throw ConfigError("dolly.distances must not be empty");
  try {
    build_field(c);
    build_levels(c);
    c.generator.validate();
    build_decoder(c);
    build_camera(c).validate();
    c.render.validate();
    c.fit.validate();
    if (c.detail.channels != c.generator.channels) {
      throw ConfigError("detail.channels must equal generator.channels");
    }
    DetailVoxel::zeros(build_camera(c), 1.0, c.detail.height, c.detail.width, c.detail.depth,
                       c.detail.channels);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
}

ScalarField build_field(const SceneConfig& c) {
  const FieldSpec& f = c.field;
  if (f.type == "sphere") return ScalarField::sphere(f.center);
  if (f.type == "plane") return ScalarField::plane(f.normal);
  if (f.type == "ellipsoid") return ScalarField::ellipsoid(f.matrix);
  if (f.type == "mlp") {
    Mlp net = f.weights.empty()
                  ? Mlp::random(with_ends(3, f.hidden, 1), f.seed, f.gain, Mlp::Output::kIdentity)
                  : load_mlp(resolve(c, f.weights));
    if (net.input_dim() != 3 || net.output_dim() != 1) {
      throw ConfigError("field mlp must map 3 inputs to 1 output");
    }
    return ScalarField::mlp(std::move(net));
  }
  throw ConfigError("field.type must be sphere, plane, ellipsoid or mlp; got '" + f.type + "'");
}

IsoLevels build_levels(const SceneConfig& c) {
  if (!c.levels.values.empty()) return IsoLevels(c.levels.values);
  return IsoLevels::uniform(c.levels.count, c.levels.min, c.levels.max);
}

Mlp build_decoder(const SceneConfig& c) {
  Mlp net = c.decoder.weights.empty()
                ? Mlp::random(with_ends(c.generator.channels, c.decoder.hidden, 4), c.decoder.seed,
                              c.decoder.gain, Mlp::Output::kSigmoid)
                : load_mlp(resolve(c, c.decoder.weights));
  if (net.input_dim() != c.generator.channels || net.output_dim() != 4 ||
      net.output() != Mlp::Output::kSigmoid) {
    throw ConfigError("decoder must map generator.channels inputs to 4 sigmoid outputs");
  }
  return net;
}

CoarseModel build_model(const SceneConfig& c) {
  return CoarseModel{CoarseGenerator(c.generator, c.generator_seed), build_decoder(c),
                     build_levels(c), build_field(c)};
}

LatentCode build_latent(const SceneConfig& c, const CoarseModel& model) {
  if (c.latent.mode == "sample") return model.generator.sample_code(c.latent.index);
  if (c.latent.mode == "file") {
    LatentCode code = load_latent(resolve(c, c.latent.file));
    if (code.layers() != c.generator.latent_layers || code.dim() != c.generator.latent_dim) {
      throw ConfigError("latent file shape does not match the generator");
    }
    return code;
  }
  return model.generator.mean_code(10000);
}

TriPlaneScene build_scene(const SceneConfig& c) {
  const CoarseModel model = build_model(c);
  return model.scene(build_latent(c, model));
}

Camera build_camera(const SceneConfig& c, const std::optional<Vec3>& ypr) {
  Camera intr;
  intr.mode = c.camera.mode;
  intr.fov_y = c.camera.fov_y;
  intr.near = c.camera.near;
  intr.far = c.camera.far;
  intr.ortho_half_height = c.camera.ortho_half_height;
  const Vec3 pose = ypr.value_or(Vec3(c.camera.yaw, c.camera.pitch, c.camera.roll));
  return orbit_camera(pose.x(), pose.y(), pose.z(), c.camera.radius, c.camera.target, intr);
}

UpsampleOp build_upsample(const SceneConfig& c) {
  UpsampleOp op;
  if (c.detail.upsample == "conv") {
    op.kind = UpsampleOp::Kind::kConvStack;
    op.stack = load_conv_stack(resolve(c, c.detail.conv_weights));
  }
  return op;
}

std::optional<DetailManifolds> build_detail_from_config(const SceneConfig& c,
                                                        const TriPlaneScene& scene,
                                                        const std::string& voxel_file) {
  const std::string file = voxel_file.empty() ? c.detail.file : voxel_file;
  if (file.empty()) return std::nullopt;
  const Camera camera = build_camera(c);
  const int w = c.render.width;
  const int h = c.render.height;
  const DetailVoxel voxel =
      load_voxel(voxel_file.empty() ? resolve(c, file) : std::filesystem::path(file), camera,
                 static_cast<double>(w) / h);
  if (voxel.channels != scene.channels()) {
    throw ConfigError("detail voxel channels do not match the scene");
  }
  const ManifoldCache cache =
      cache_manifolds(scene, camera, w, h, c.fit.cache_factor, c.render.solver);
  return build_detail(voxel, cache, build_upsample(c));
}

}  // namespace rmf
