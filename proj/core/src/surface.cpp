#include "evtac/surface.hpp"

#include <algorithm>
#include <cmath>

#include "evtac/braille_table.hpp"
#include "evtac/errors.hpp"

namespace evtac {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// 1 inside [a, b], blended to 0 over `e` centred on each edge.
double soft_interval(double x, double a, double b, double e) {
  if (e <= 0.0) return (x >= a && x <= b) ? 1.0 : 0.0;
  return smoothstep((x - a) / e + 0.5) * smoothstep((b - x) / e + 0.5);
}

double cap_height(double rho, double radius, double protrusion) {
  const double d = radius * radius - rho * rho;
  if (d <= 0.0) return 0.0;
  return std::max(0.0, std::sqrt(d) - (radius - protrusion));
}

void require_positive(double v, const char* field) {
  if (!(v > 0.0)) throw ConfigError("must be positive", field);
}

}  // namespace

double smoothstep(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return t * t * (3.0 - 2.0 * t);
}

SurfaceModel::SurfaceModel() : SurfaceModel(FlatShape{}) {}

SurfaceModel::SurfaceModel(SurfaceShape shape, Placement placement)
    : shape_(std::move(shape)), placement_(placement) {
  require_positive(placement_.plate_depth_mm, "surface/plate_depth_mm");
  if (placement_.edge_width_mm < 0.0) throw ConfigError("must be non-negative", "surface/edge_width_mm");

  std::visit(Overloaded{
                 [](const FlatShape&) {},
                 [](const SphereShape& s) {
                   require_positive(s.radius_mm, "surface/radius_mm");
                   if (!(s.protrusion_mm > 0.0 && s.protrusion_mm <= s.radius_mm)) {
                     throw ConfigError("must lie in (0, radius]", "surface/protrusion_mm");
                   }
                 },
                 [](const StairsShape& s) {
                   require_positive(s.step_height_mm, "surface/step_height_mm");
                   require_positive(s.step_width_mm, "surface/step_width_mm");
                   require_positive(s.length_mm, "surface/length_mm");
                   if (s.n_steps < 1) throw ConfigError("must be >= 1", "surface/n_steps");
                 },
                 [](const SparseSphereShape& s) {
                   require_positive(s.sphere_radius_mm, "surface/sphere_radius_mm");
                   require_positive(s.protrusion_mm, "surface/protrusion_mm");
                   require_positive(s.ring_width_mm, "surface/ring_width_mm");
                   if (s.ring_radii_mm.empty()) throw ConfigError("needs at least one ring", "surface/ring_radii_mm");
                 },
                 [](const LineArrayShape& s) {
                   require_positive(s.line_width_mm, "surface/line_width_mm");
                   require_positive(s.pitch_mm, "surface/pitch_mm");
                   require_positive(s.length_mm, "surface/length_mm");
                   if (s.heights_mm.empty()) throw ConfigError("needs at least one line", "surface/heights_mm");
                   for (double h : s.heights_mm) {
                     if (h < 0.0) throw ConfigError("heights must be non-negative", "surface/heights_mm");
                   }
                 },
                 [this](const BraillePlateShape& s) {
                   require_positive(s.dot_radius_mm, "surface/dot_radius_mm");
                   require_positive(s.dot_spacing_mm, "surface/dot_spacing_mm");
                   require_positive(s.cell_pitch_mm, "surface/cell_pitch_mm");
                   if (s.dot_spacing_mm + 2.0 * s.dot_radius_mm >= s.cell_pitch_mm) {
                     throw ConfigError("cells overlap; increase the pitch", "surface/cell_pitch_mm");
                   }
                   const double x0 = placement_.origin_x_mm;
                   const double y0 = placement_.origin_y_mm - s.dot_spacing_mm;  // rows centred on origin_y
                   for (std::size_t i = 0; i < s.text.size(); ++i) {
                     braille::CellPattern p;
                     try {
                       p = braille::encode(s.text[i]);
                     } catch (const std::invalid_argument& e) {
                       throw ConfigError(e.what(), "surface/text");
                     }
                     std::vector<std::pair<double, double>> dots;
                     for (int r = 0; r < 3; ++r) {
                       for (int c = 0; c < 2; ++c) {
                         if (p.dot(r, c)) {
                           dots.emplace_back(x0 + static_cast<double>(i) * s.cell_pitch_mm + c * s.dot_spacing_mm,
                                             y0 + r * s.dot_spacing_mm);
                         }
                       }
                     }
                     braille_dots_.push_back(std::move(dots));
                   }
                 },
                 [](const HeightfieldShape& s) {
                   require_positive(s.spacing_mm, "surface/spacing_mm");
                   if (s.heights_mm.width() < 2 || s.heights_mm.height() < 2) {
                     throw ConfigError("heightfield needs at least 2x2 samples", "surface/heights_mm");
                   }
                 },
             },
             shape_);

  max_height_ = std::visit(
      Overloaded{
          [](const FlatShape&) { return 0.0; },
          [](const SphereShape& s) { return s.protrusion_mm; },
          [](const StairsShape& s) { return s.step_height_mm * s.n_steps; },
          [](const SparseSphereShape& s) { return s.protrusion_mm; },
          [](const LineArrayShape& s) { return *std::max_element(s.heights_mm.begin(), s.heights_mm.end()); },
          [](const BraillePlateShape& s) { return s.dot_radius_mm; },
          [](const HeightfieldShape& s) {
            return std::max(0.0, *std::max_element(s.heights_mm.values().begin(), s.heights_mm.values().end()));
          },
      },
      shape_);
  max_height_ = std::min(max_height_, kMaxIndentationMm);
  build_support();
}

std::string SurfaceModel::kind() const {
  return std::visit(Overloaded{
                        [](const FlatShape&) { return std::string("flat"); },
                        [](const SphereShape&) { return std::string("sphere"); },
                        [](const StairsShape&) { return std::string("stairs"); },
                        [](const SparseSphereShape&) { return std::string("sparse_sphere"); },
                        [](const LineArrayShape&) { return std::string("line_array"); },
                        [](const BraillePlateShape&) { return std::string("braille_plate"); },
                        [](const HeightfieldShape&) { return std::string("heightfield"); },
                    },
                    shape_);
}

double SurfaceModel::height(double x, double y) const {
  return std::min(raw_height(x, y), kMaxIndentationMm);
}

double SurfaceModel::raw_height(double x, double y) const {
  const double lx = x - placement_.origin_x_mm;
  const double ly = y - placement_.origin_y_mm;
  const double e = placement_.edge_width_mm;
  return std::visit(
      Overloaded{
          [](const FlatShape&) { return 0.0; },
          [&](const SphereShape& s) { return cap_height(std::hypot(lx, ly), s.radius_mm, s.protrusion_mm); },
          [&](const StairsShape& s) {
            const double lateral = soft_interval(ly, -0.5 * s.length_mm, 0.5 * s.length_mm, e);
            if (lateral == 0.0) return 0.0;
            double levels = 0.0;
            for (int i = 0; i < s.n_steps; ++i) {
              levels += e > 0.0 ? smoothstep((lx - i * s.step_width_mm) / e + 0.5)
                                : (lx >= i * s.step_width_mm ? 1.0 : 0.0);
            }
            const double end = s.n_steps * s.step_width_mm;
            const double drop = e > 0.0 ? smoothstep((end - lx) / e + 0.5) : (lx <= end ? 1.0 : 0.0);
            return s.step_height_mm * levels * drop * lateral;
          },
          [&](const SparseSphereShape& s) {
            const double rho = std::hypot(lx, ly);
            double h = 0.0;
            for (double r : s.ring_radii_mm) {
              const double crest = cap_height(r, s.sphere_radius_mm, s.protrusion_mm);
              h = std::max(h, crest * soft_interval(rho, r - 0.5 * s.ring_width_mm, r + 0.5 * s.ring_width_mm, e));
            }
            return h;
          },
          [&](const LineArrayShape& s) {
            const double lateral = soft_interval(ly, -0.5 * s.length_mm, 0.5 * s.length_mm, e);
            if (lateral == 0.0) return 0.0;
            const int n = static_cast<int>(s.heights_mm.size());
            const int k = static_cast<int>(std::floor(lx / s.pitch_mm));
            double h = 0.0;
            for (int i = std::max(0, k - 1); i <= std::min(n - 1, k + 1); ++i) {
              const double a = i * s.pitch_mm;
              h = std::max(h, s.heights_mm[static_cast<std::size_t>(i)] *
                                  soft_interval(lx, a, a + s.line_width_mm, e));
            }
            return h * lateral;
          },
          [&](const BraillePlateShape& s) {
            const int n = static_cast<int>(braille_dots_.size());
            const int k = static_cast<int>(std::floor(lx / s.cell_pitch_mm));
            double h = 0.0;
            for (int i = std::max(0, k - 1); i <= std::min(n - 1, k + 1); ++i) {
              for (const auto& [dx, dy] : braille_dots_[static_cast<std::size_t>(i)]) {
                const double d2 = (x - dx) * (x - dx) + (y - dy) * (y - dy);
                const double r2 = s.dot_radius_mm * s.dot_radius_mm;
                if (d2 < r2) h = std::max(h, std::sqrt(r2 - d2));
              }
            }
            return h;
          },
          [&](const HeightfieldShape& s) {
            const double gx = lx / s.spacing_mm;
            const double gy = ly / s.spacing_mm;
            const int w = s.heights_mm.width();
            const int hh = s.heights_mm.height();
            if (gx < 0.0 || gy < 0.0 || gx > w - 1 || gy > hh - 1) return 0.0;
            const int ix = std::min(static_cast<int>(gx), w - 2);
            const int iy = std::min(static_cast<int>(gy), hh - 2);
            const double fx = gx - ix, fy = gy - iy;
            const auto& g = s.heights_mm;
            const double v = (1 - fx) * (1 - fy) * g(ix, iy) + fx * (1 - fy) * g(ix + 1, iy) +
                             (1 - fx) * fy * g(ix, iy + 1) + fx * fy * g(ix + 1, iy + 1);
            return std::max(0.0, v);
          },
      },
      shape_);
}

void SurfaceModel::build_support() {
  const double ox = placement_.origin_x_mm;
  const double oy = placement_.origin_y_mm;
  const double m = 0.5 * placement_.edge_width_mm + 1e-6;
  support_.clear();
  std::visit(Overloaded{
                 [](const FlatShape&) {},
                 [&](const SphereShape& s) {
                   const double r = std::sqrt(s.radius_mm * s.radius_mm -
                                              (s.radius_mm - s.protrusion_mm) * (s.radius_mm - s.protrusion_mm));
                   support_.push_back({ox - r, ox + r, oy - r, oy + r});
                 },
                 [&](const StairsShape& s) {
                   support_.push_back({ox - m, ox + s.n_steps * s.step_width_mm + m, oy - 0.5 * s.length_mm - m,
                                       oy + 0.5 * s.length_mm + m});
                 },
                 [&](const SparseSphereShape& s) {
                   double r = 0.0;
                   for (double ri : s.ring_radii_mm) r = std::max(r, ri + 0.5 * s.ring_width_mm);
                   r += m;
                   support_.push_back({ox - r, ox + r, oy - r, oy + r});
                 },
                 [&](const LineArrayShape& s) {
                   for (std::size_t i = 0; i < s.heights_mm.size(); ++i) {
                     if (s.heights_mm[i] <= 0.0) continue;
                     const double a = ox + static_cast<double>(i) * s.pitch_mm;
                     support_.push_back({a - m, a + s.line_width_mm + m, oy - 0.5 * s.length_mm - m,
                                         oy + 0.5 * s.length_mm + m});
                   }
                 },
                 [&](const BraillePlateShape& s) {
                   for (const auto& cell : braille_dots_) {
                     for (const auto& [dx, dy] : cell) {
                       support_.push_back({dx - s.dot_radius_mm, dx + s.dot_radius_mm, dy - s.dot_radius_mm,
                                           dy + s.dot_radius_mm});
                     }
                   }
                 },
                 [&](const HeightfieldShape& s) {
                   support_.push_back({ox, ox + (s.heights_mm.width() - 1) * s.spacing_mm, oy,
                                       oy + (s.heights_mm.height() - 1) * s.spacing_mm});
                 },
             },
             shape_);
}

Box2 SurfaceModel::extent() const {
  if (support_.empty()) {
    return {placement_.origin_x_mm - 0.5, placement_.origin_x_mm + 0.5, placement_.origin_y_mm - 0.5,
            placement_.origin_y_mm + 0.5};
  }
  Box2 b = support_.front();
  for (const auto& s : support_) {
    b.x0 = std::min(b.x0, s.x0);
    b.x1 = std::max(b.x1, s.x1);
    b.y0 = std::min(b.y0, s.y0);
    b.y1 = std::max(b.y1, s.y1);
  }
  return b;
}

int SurfaceModel::region_count() const {
  return std::visit(Overloaded{
                        [](const FlatShape&) { return 0; },
                        [](const SphereShape&) { return 1; },
                        [](const StairsShape& s) { return s.n_steps; },
                        [](const SparseSphereShape& s) { return static_cast<int>(s.ring_radii_mm.size()); },
                        [](const LineArrayShape& s) { return static_cast<int>(s.heights_mm.size()); },
                        [this](const BraillePlateShape&) {
                          int n = 0;
                          for (const auto& c : braille_dots_) n += static_cast<int>(c.size());
                          return n;
                        },
                        [](const HeightfieldShape&) { return 1; },
                    },
                    shape_);
}

int SurfaceModel::region_at(double x, double y) const {
  const double lx = x - placement_.origin_x_mm;
  const double ly = y - placement_.origin_y_mm;
  return std::visit(
      Overloaded{
          [](const FlatShape&) { return -1; },
          [&](const SphereShape& s) { return cap_height(std::hypot(lx, ly), s.radius_mm, s.protrusion_mm) > 0.0 ? 0 : -1; },
          [&](const StairsShape& s) {
            if (std::abs(ly) > 0.5 * s.length_mm || lx < 0.0 || lx >= s.n_steps * s.step_width_mm) return -1;
            return static_cast<int>(lx / s.step_width_mm);
          },
          [&](const SparseSphereShape& s) {
            const double rho = std::hypot(lx, ly);
            for (std::size_t i = 0; i < s.ring_radii_mm.size(); ++i) {
              if (std::abs(rho - s.ring_radii_mm[i]) <= 0.5 * s.ring_width_mm) return static_cast<int>(i);
            }
            return -1;
          },
          [&](const LineArrayShape& s) {
            if (std::abs(ly) > 0.5 * s.length_mm || lx < 0.0) return -1;
            const int k = static_cast<int>(lx / s.pitch_mm);
            if (k >= static_cast<int>(s.heights_mm.size())) return -1;
            return (lx - k * s.pitch_mm) <= s.line_width_mm ? k : -1;
          },
          [&](const BraillePlateShape& s) {
            int idx = 0;
            for (const auto& cell : braille_dots_) {
              for (const auto& [dx, dy] : cell) {
                if (std::hypot(x - dx, y - dy) <= s.dot_radius_mm) return idx;
                ++idx;
              }
            }
            return -1;
          },
          [&](const HeightfieldShape&) { return raw_height(x, y) > 0.0 ? 0 : -1; },
      },
      shape_);
}

}  // namespace evtac
