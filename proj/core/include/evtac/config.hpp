#pragma once

#include <filesystem>
#include <string>

#include "evtac/calibration.hpp"
#include "evtac/geometry.hpp"
#include "evtac/simulator.hpp"
#include "evtac/surface.hpp"

namespace evtac {

/// Camera JSON: {fx, fy, cx, cy, width, height, hand_eye: 16 numbers, row-major}.
/// A missing hand_eye means identity.
struct CameraConfig {
  CameraIntrinsics intrinsics;
  PoseSE3 hand_eye;  // E_T_C
};

CameraConfig parse_camera_config(const std::string& json_text);
CameraConfig load_camera_config(const std::filesystem::path& path);
std::string camera_config_json(const CameraConfig& c);

/// Pose CSV with header `t_us,x_mm,y_mm,z_mm,qx,qy,qz,qw`. Throws DataError
/// naming the line of the first malformed row.
Trajectory read_pose_csv(const std::filesystem::path& path);
void write_pose_csv(const std::filesystem::path& path, const Trajectory& trajectory);

/// Calibration JSON: {c, g_f, w_s, w_m, w_e, mae_mm, coverage, grid_spec, timestamp}.
struct CalibrationRecord {
  CalibParams params;
  double mae_mm = 0.0;
  double coverage = 0.0;
  std::string grid_spec;
  std::string timestamp;  // ISO 8601, UTC
};

CalibrationRecord parse_calibration(const std::string& json_text);
CalibrationRecord load_calibration(const std::filesystem::path& path);
std::string calibration_json(const CalibrationRecord& r);
void save_calibration(const std::filesystem::path& path, const CalibrationRecord& r);

/// Surface JSON: {"kind": "sphere" | "stairs" | "sparse_sphere" | "line_array" |
/// "braille_plate" | "flat", shape fields..., "placement": {...}}.
/// Unknown keys are rejected so typos surface as ConfigError with the field path.
SurfaceModel parse_surface(const std::string& json_text);
std::string surface_json(const SurfaceModel& s);

/// Scan JSON: ScanConfig fields by name, intrinsics nested under "camera".
ScanConfig parse_scan_config(const std::string& json_text);
std::string scan_config_json(const ScanConfig& c);

/// Current UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

std::string read_text_file(const std::filesystem::path& path);

}  // namespace evtac
