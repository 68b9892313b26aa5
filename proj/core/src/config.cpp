#include "evtac/config.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "evtac/errors.hpp"

namespace evtac {
namespace {

using nlohmann::json;

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
}

// Reads typed fields from one JSON object and rejects keys nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("expected an object", path_.empty() ? "/" : path_);
  }

  std::string field(const std::string& key) const { return path_ + "/" + key; }
  bool has(const std::string& key) const { return j_.contains(key); }

  template <class T>
  T get(const std::string& key, T fallback) {
    seen_.insert(key);
    if (!j_.contains(key)) return fallback;
    return convert<T>(j_.at(key), field(key));
  }

  template <class T>
  T require(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError("missing required field", field(key));
    return convert<T>(j_.at(key), field(key));
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown field", field(key));
    }
  }

  template <class T>
  static T convert(const json& v, const std::string& where) {
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw ConfigError("expected a number", where);
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError("expected an integer", where);
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError("expected a string", where);
      }
      return v.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(e.what(), where);
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::vector<double> number_list(const json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError("expected an array of numbers", where);
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(ObjectReader::convert<double>(v[i], where + "/" + std::to_string(i)));
  }
  return out;
}

CameraIntrinsics read_intrinsics(ObjectReader& r) {
  CameraIntrinsics k;
  k.fx = r.get("fx", k.fx);
  k.fy = r.get("fy", k.fy);
  k.cx = r.get("cx", k.cx);
  k.cy = r.get("cy", k.cy);
  k.width = r.get("width", k.width);
  k.height = r.get("height", k.height);
  k.validate();
  return k;
}

json intrinsics_json(const CameraIntrinsics& k) {
  return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

json placement_json(const SurfacePlacement& p) {
  return {{"origin_x_mm", p.origin_x_mm},
          {"origin_y_mm", p.origin_y_mm},
          {"plate_depth_mm", p.plate_depth_mm},
          {"edge_width_mm", p.edge_width_mm}};
}

SurfacePlacement read_placement(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  SurfacePlacement p;
  p.origin_x_mm = r.get("origin_x_mm", p.origin_x_mm);
  p.origin_y_mm = r.get("origin_y_mm", p.origin_y_mm);
  p.plate_depth_mm = r.get("plate_depth_mm", p.plate_depth_mm);
  p.edge_width_mm = r.get("edge_width_mm", p.edge_width_mm);
  r.finish();
  return p;
}

// Wraps constructor validation failures so they carry the field path.
template <class F>
auto with_field(const std::string& field, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what(), field);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what(), field);
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file", path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CameraConfig parse_camera_config(const std::string& json_text) {
  const json j = parse_json(json_text);
  ObjectReader r(j, "");
  CameraConfig c;
  c.intrinsics = read_intrinsics(r);
  if (r.has("hand_eye")) {
    const auto m = number_list(r.raw("hand_eye"), "/hand_eye");
    if (m.size() != 16) throw ConfigError("expected 16 numbers (4x4 row-major)", "/hand_eye");
    Mat4 h;
    for (int i = 0; i < 16; ++i) h(i / 4, i % 4) = m[static_cast<std::size_t>(i)];
    if (std::abs(h(3, 0)) + std::abs(h(3, 1)) + std::abs(h(3, 2)) + std::abs(h(3, 3) - 1.0) > 1e-9) {
      throw ConfigError("last row must be 0 0 0 1", "/hand_eye");
    }
    c.hand_eye = PoseSE3::from_matrix(h);
  }
  r.finish();
  return c;
}

CameraConfig load_camera_config(const std::filesystem::path& path) { return parse_camera_config(read_text_file(path)); }

std::string camera_config_json(const CameraConfig& c) {
  json j = intrinsics_json(c.intrinsics);
  const Mat4 m = c.hand_eye.matrix();
  json h = json::array();
  for (int i = 0; i < 16; ++i) h.push_back(m(i / 4, i % 4));
  j["hand_eye"] = h;
  return j.dump(2);
}

Trajectory read_pose_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open pose file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty pose file " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "t_us,x_mm,y_mm,z_mm,qx,qy,qz,qw") throw DataError("unexpected pose CSV header: " + line);
  std::vector<PoseSE3> samples;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    long long t = 0;
    double x, y, z, qx, qy, qz, qw;
    char tail = 0;
    if (std::sscanf(line.c_str(), "%lld,%lf,%lf,%lf,%lf,%lf,%lf,%lf%c", &t, &x, &y, &z, &qx, &qy, &qz, &qw, &tail) <
            8 ||
        (tail != 0 && tail != '\r')) {
      throw DataError("malformed pose row at line " + std::to_string(line_no) + " of " + path.string());
    }
    const Quat q(qw, qx, qy, qz);
    if (!(std::abs(q.norm() - 1.0) < 1e-6)) {
      throw DataError("quaternion is not unit length at line " + std::to_string(line_no));
    }
    samples.emplace_back(q.normalized(), Vec3(x, y, z), static_cast<TimeUs>(t));
  }
  return Trajectory(std::move(samples));
}

void write_pose_csv(const std::filesystem::path& path, const Trajectory& trajectory) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "t_us,x_mm,y_mm,z_mm,qx,qy,qz,qw\n";
  char buf[256];
  for (const PoseSE3& p : trajectory.samples()) {
    const Vec3& t = p.translation();
    const Quat& q = p.quaternion();
    std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  static_cast<long long>(p.timestamp()), t.x(), t.y(), t.z(), q.x(), q.y(), q.z(), q.w());
    out << buf;
  }
  if (!out) throw Error("write failed: " + path.string());
}

CalibrationRecord parse_calibration(const std::string& json_text) {
  const json j = parse_json(json_text);
  ObjectReader r(j, "");
  CalibrationRecord rec;
  rec.params.c = r.require<int>("c");
  rec.params.g_f = r.require<int>("g_f");
  rec.params.weights.w_s = r.require<double>("w_s");
  rec.params.weights.w_m = r.require<double>("w_m");
  rec.params.weights.w_e = r.require<double>("w_e");
  rec.mae_mm = r.get("mae_mm", 0.0);
  rec.coverage = r.get("coverage", 0.0);
  rec.grid_spec = r.get("grid_spec", std::string{});
  rec.timestamp = r.get("timestamp", std::string{});
  r.finish();
  rec.params.validate();
  return rec;
}

CalibrationRecord load_calibration(const std::filesystem::path& path) { return parse_calibration(read_text_file(path)); }

std::string calibration_json(const CalibrationRecord& r) {
  json j = {{"c", r.params.c},
            {"g_f", r.params.g_f},
            {"w_s", r.params.weights.w_s},
            {"w_m", r.params.weights.w_m},
            {"w_e", r.params.weights.w_e},
            {"mae_mm", r.mae_mm},
            {"coverage", r.coverage},
            {"grid_spec", r.grid_spec},
            {"timestamp", r.timestamp}};
  return j.dump(2);
}

void save_calibration(const std::filesystem::path& path, const CalibrationRecord& r) {
  write_text_file(path, calibration_json(r) + "\n");
}

SurfaceModel parse_surface(const std::string& json_text) {
  const json j = parse_json(json_text);
  ObjectReader r(j, "");
  const std::string kind = r.require<std::string>("kind");
  const SurfacePlacement placement = r.has("placement") ? read_placement(r.raw("placement"), "/placement")
                                                        : SurfacePlacement{};
  SurfaceShape shape;
  if (kind == "flat") {
    shape = FlatShape{};
  } else if (kind == "sphere") {
    SphereShape s;
    s.radius_mm = r.get("radius_mm", s.radius_mm);
    s.protrusion_mm = r.get("protrusion_mm", s.protrusion_mm);
    shape = s;
  } else if (kind == "stairs") {
    StairsShape s;
    s.step_height_mm = r.get("step_height_mm", s.step_height_mm);
    s.step_width_mm = r.get("step_width_mm", s.step_width_mm);
    s.n_steps = r.get("n_steps", s.n_steps);
    s.length_mm = r.get("length_mm", s.length_mm);
    shape = s;
  } else if (kind == "sparse_sphere") {
    SparseSphereShape s;
    if (r.has("ring_radii_mm")) s.ring_radii_mm = number_list(r.raw("ring_radii_mm"), "/ring_radii_mm");
    s.sphere_radius_mm = r.get("sphere_radius_mm", s.sphere_radius_mm);
    s.protrusion_mm = r.get("protrusion_mm", s.protrusion_mm);
    s.ring_width_mm = r.get("ring_width_mm", s.ring_width_mm);
    shape = s;
  } else if (kind == "line_array") {
    LineArrayShape s;
    if (r.has("heights_mm")) s.heights_mm = number_list(r.raw("heights_mm"), "/heights_mm");
    s.line_width_mm = r.get("line_width_mm", s.line_width_mm);
    s.pitch_mm = r.get("pitch_mm", s.pitch_mm);
    s.length_mm = r.get("length_mm", s.length_mm);
    shape = s;
  } else if (kind == "braille_plate") {
    BraillePlateShape s;
    s.text = r.get("text", s.text);
    s.dot_radius_mm = r.get("dot_radius_mm", s.dot_radius_mm);
    s.dot_spacing_mm = r.get("dot_spacing_mm", s.dot_spacing_mm);
    s.cell_pitch_mm = r.get("cell_pitch_mm", s.cell_pitch_mm);
    shape = s;
  } else if (kind == "heightfield") {
    HeightfieldShape s;
    const json& rows = r.raw("heights_mm");
    if (!rows.is_array() || rows.empty()) throw ConfigError("expected a non-empty array of rows", "/heights_mm");
    std::vector<std::vector<double>> grid;
    for (std::size_t y = 0; y < rows.size(); ++y) {
      grid.push_back(number_list(rows[y], "/heights_mm/" + std::to_string(y)));
      if (grid.back().size() != grid.front().size()) {
        throw ConfigError("rows differ in length", "/heights_mm/" + std::to_string(y));
      }
    }
    s.heights_mm = Grid<double>(static_cast<int>(grid.front().size()), static_cast<int>(grid.size()));
    for (std::size_t y = 0; y < grid.size(); ++y) {
      for (std::size_t x = 0; x < grid[y].size(); ++x) s.heights_mm(static_cast<int>(x), static_cast<int>(y)) = grid[y][x];
    }
    s.spacing_mm = r.get("spacing_mm", s.spacing_mm);
    shape = std::move(s);
  } else {
    throw ConfigError("unknown surface kind '" + kind + "'", "/kind");
  }
  r.finish();
  return with_field("/" + kind, [&] { return SurfaceModel(std::move(shape), placement); });
}

std::string surface_json(const SurfaceModel& s) {
  json j = std::visit(
      [](const auto& shape) -> json {
        using T = std::decay_t<decltype(shape)>;
        if constexpr (std::is_same_v<T, FlatShape>) {
          return {{"kind", "flat"}};
        } else if constexpr (std::is_same_v<T, SphereShape>) {
          return {{"kind", "sphere"}, {"radius_mm", shape.radius_mm}, {"protrusion_mm", shape.protrusion_mm}};
        } else if constexpr (std::is_same_v<T, StairsShape>) {
          return {{"kind", "stairs"},
                  {"step_height_mm", shape.step_height_mm},
                  {"step_width_mm", shape.step_width_mm},
                  {"n_steps", shape.n_steps},
                  {"length_mm", shape.length_mm}};
        } else if constexpr (std::is_same_v<T, SparseSphereShape>) {
          return {{"kind", "sparse_sphere"},
                  {"ring_radii_mm", shape.ring_radii_mm},
                  {"sphere_radius_mm", shape.sphere_radius_mm},
                  {"protrusion_mm", shape.protrusion_mm},
                  {"ring_width_mm", shape.ring_width_mm}};
        } else if constexpr (std::is_same_v<T, LineArrayShape>) {
          return {{"kind", "line_array"},
                  {"heights_mm", shape.heights_mm},
                  {"line_width_mm", shape.line_width_mm},
                  {"pitch_mm", shape.pitch_mm},
                  {"length_mm", shape.length_mm}};
        } else if constexpr (std::is_same_v<T, BraillePlateShape>) {
          return {{"kind", "braille_plate"},
                  {"text", shape.text},
                  {"dot_radius_mm", shape.dot_radius_mm},
                  {"dot_spacing_mm", shape.dot_spacing_mm},
                  {"cell_pitch_mm", shape.cell_pitch_mm}};
        } else {
          json rows = json::array();
          for (int y = 0; y < shape.heights_mm.height(); ++y) {
            json row = json::array();
            for (int x = 0; x < shape.heights_mm.width(); ++x) row.push_back(shape.heights_mm(x, y));
            rows.push_back(row);
          }
          return {{"kind", "heightfield"}, {"heights_mm", rows}, {"spacing_mm", shape.spacing_mm}};
        }
      },
      s.shape());
  j["placement"] = placement_json(s.placement());
  return j.dump(2);
}

ScanConfig parse_scan_config(const std::string& json_text) {
  const json j = parse_json(json_text);
  ObjectReader r(j, "");
  ScanConfig c;
  if (r.has("camera")) {
    ObjectReader cam(r.raw("camera"), "/camera");
    c.intrinsics = read_intrinsics(cam);
    cam.finish();
  }
  c.v_mm_s = r.get("v_mm_s", c.v_mm_s);
  c.x_start_mm = r.get("x_start_mm", c.x_start_mm);
  c.y_mm = r.get("y_mm", c.y_mm);
  c.scan_length_mm = r.get("scan_length_mm", c.scan_length_mm);
  c.static_duration_us = r.get<TimeUs>("static_duration_us", c.static_duration_us);
  c.c_sim = r.get("c_sim", c.c_sim);
  c.noise_rate_hz = r.get("noise_rate_hz", c.noise_rate_hz);
  c.sample_rate_hz = r.get("sample_rate_hz", c.sample_rate_hz);
  c.pose_rate_hz = r.get("pose_rate_hz", c.pose_rate_hz);
  c.seed = r.get<std::uint64_t>("seed", c.seed);
  c.shading.i0 = r.get("shading_i0", c.shading.i0);
  c.shading.gain = r.get("shading_gain", c.shading.gain);
  c.threads = r.get("threads", c.threads);
  r.finish();
  with_field("", [&] {
    c.validate();
    return 0;
  });
  return c;
}

std::string scan_config_json(const ScanConfig& c) {
  json j = {{"camera", intrinsics_json(c.intrinsics)},
            {"v_mm_s", c.v_mm_s},
            {"x_start_mm", c.x_start_mm},
            {"y_mm", c.y_mm},
            {"scan_length_mm", c.scan_length_mm},
            {"static_duration_us", c.static_duration_us},
            {"c_sim", c.c_sim},
            {"noise_rate_hz", c.noise_rate_hz},
            {"sample_rate_hz", c.sample_rate_hz},
            {"pose_rate_hz", c.pose_rate_hz},
            {"seed", c.seed},
            {"shading_i0", c.shading.i0},
            {"shading_gain", c.shading.gain},
            {"threads", c.threads}};
  return j.dump(2);
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace evtac
