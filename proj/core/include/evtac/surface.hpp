#pragma once

#include <string>
#include <variant>
#include <vector>

#include "evtac/grid.hpp"

namespace evtac {

/// Largest membrane indentation the roller elastomer supports (mm).
inline constexpr double kMaxIndentationMm = 4.5;
/// Roller radius; the undeformed membrane sits this far from the camera.
inline constexpr double kNominalMembraneDepthMm = 47.0;

/// Axis-aligned rectangle in plate (world XY) coordinates, mm.
struct Box2 {
  double x0 = 0.0, x1 = 0.0, y0 = 0.0, y1 = 0.0;
  bool contains(double x, double y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
};

struct FlatShape {};

/// Sphere cap pressed into the membrane: its top protrudes `protrusion_mm`
/// above the plate, so the contact circle radius is sqrt(R^2 - (R - p)^2).
struct SphereShape {
  double radius_mm = 4.0;
  double protrusion_mm = 0.6;
};

/// `n_steps` ascending steps along +X, each `step_width_mm` long, dropping back
/// to the plate after the last one. `length_mm` is the lateral (Y) extent.
struct StairsShape {
  double step_height_mm = 0.1;
  double step_width_mm = 2.0;
  int n_steps = 4;
  double length_mm = 12.0;
};

/// Concentric raised rings whose crest heights follow a sphere cap.
struct SparseSphereShape {
  std::vector<double> ring_radii_mm{0.7, 1.4, 2.1};
  double sphere_radius_mm = 4.0;
  double protrusion_mm = 0.6;
  double ring_width_mm = 0.35;
};

/// Rectangular bars of the given heights spaced `pitch_mm` along X.
struct LineArrayShape {
  std::vector<double> heights_mm{0.6, 0.6, 0.6};
  double line_width_mm = 2.0;
  double pitch_mm = 4.0;
  double length_mm = 16.0;
};

/// Hemispherical dots laid out as Grade-1 cells along X.
struct BraillePlateShape {
  std::string text = "abcdefghijklmnopqrstuvwxyz";
  double dot_radius_mm = 0.635;
  double dot_spacing_mm = 2.54;
  double cell_pitch_mm = 7.2;
};

/// Sampled heights (mm), bilinear between samples, zero outside.
struct HeightfieldShape {
  Grid<double> heights_mm;
  double spacing_mm = 0.1;
};

using SurfaceShape = std::variant<FlatShape, SphereShape, StairsShape, SparseSphereShape, LineArrayShape,
                                  BraillePlateShape, HeightfieldShape>;

/// Where a shape sits on the plate and how far the plate is from the camera.
struct SurfacePlacement {
  double origin_x_mm = 0.0;
  double origin_y_mm = 0.0;
  double plate_depth_mm = kNominalMembraneDepthMm;
  double edge_width_mm = 0.25;
};

/// Ground-truth geometry in the plate frame: X along the rolling direction,
/// Y lateral, Z away from the camera. The plate lies at Z = plate_depth and
/// objects rise towards the camera, so the membrane sits at
/// plate_depth - height(X, Y). Step and bar edges are blended over
/// `edge_width_mm` with a smoothstep, standing in for elastomer conformity.
class SurfaceModel {
 public:
  using Placement = SurfacePlacement;

  SurfaceModel();
  explicit SurfaceModel(SurfaceShape shape, Placement placement = {});

  const SurfaceShape& shape() const noexcept { return shape_; }
  const Placement& placement() const noexcept { return placement_; }
  std::string kind() const;

  /// Height above the plate in mm, clipped to kMaxIndentationMm.
  double height(double x, double y) const;
  double membrane_depth(double x, double y) const { return placement_.plate_depth_mm - height(x, y); }
  double plate_depth() const noexcept { return placement_.plate_depth_mm; }
  double max_height() const noexcept { return max_height_; }

  /// Boxes jointly covering every point with non-zero height.
  const std::vector<Box2>& support() const noexcept { return support_; }
  /// Bounding box of the support (a unit box around the origin for flat plates).
  Box2 extent() const;

  /// Index of the structural element (bar, step, ring, dot) under (x, y), or -1.
  int region_at(double x, double y) const;
  int region_count() const;

 private:
  double raw_height(double x, double y) const;
  void build_support();

  SurfaceShape shape_;
  Placement placement_;
  double max_height_ = 0.0;
  std::vector<Box2> support_;
  // Braille dot centres (plate frame), one entry per raised dot, grouped per cell.
  std::vector<std::vector<std::pair<double, double>>> braille_dots_;
};

/// Cubic smoothstep on [0, 1].
double smoothstep(double t);

}  // namespace evtac
