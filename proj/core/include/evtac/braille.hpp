#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "evtac/braille_table.hpp"
#include "evtac/events.hpp"
#include "evtac/grid.hpp"
#include "evtac/surface.hpp"

namespace evtac::braille {

/// Image-plane velocity in px/s. Rolling is horizontal, so dv stays 0.
struct FlowEstimate {
  double du = 0.0;
  double dv = 0.0;
};

/// du = -F v / Z. Throws ConfigError unless Z > 0.
FlowEstimate estimate_flow(double v_mm_s, double f_px, double z_mm = kNominalMembraneDepthMm);

struct WarpedEvent {
  double x = 0.0;
  double y = 0.0;
};

/// x' = x - flow * (t - t_ref), with t in microseconds and flow in px/s.
std::vector<WarpedEvent> warp_events(std::span<const Event> batch, const FlowEstimate& flow, TimeUs t_ref);

/// Histogram of warped events. Canvas cell (i, j) holds the events whose
/// nearest integer position is (x_origin + i, y_origin + j).
struct Iwe {
  Grid<double> counts;
  TimeUs t_ref = 0;
  TimeUs t_last = 0;
  int x_origin = 0;
  int y_origin = 0;
  std::size_t n_events = 0;
  std::size_t dropped = 0;  // warped outside the canvas
};

Iwe accumulate_iwe(std::span<const WarpedEvent> warped, int width, int height, int x_origin = 0, int y_origin = 0);

/// Warps a batch to its first timestamp and accumulates it on a canvas widened
/// along u so every warped event of an on-sensor stream fits.
Iwe make_iwe(std::span<const Event> batch, const FlowEstimate& flow, int sensor_width, int sensor_height);

/// Population variance of the pixel values.
double image_variance(const Grid<double>& image);

struct PlateSpec {
  double dot_radius_mm = 0.635;
  double dot_spacing_mm = 2.54;
  double cell_pitch_mm = 7.2;

  void validate() const;
};

struct PreprocessParams {
  int bilateral_d = 5;
  double bilateral_sigma = 50.0;
  double clahe_clip = 2.0;
  int clahe_tiles = 8;
  int morph_kernel = 3;
};

/// Bilateral filter, CLAHE, Otsu threshold, then opening and closing. The
/// input is scaled to 8 bits by its maximum first. Output pixels are 0 or 255.
Grid<std::uint8_t> preprocess_roi(const Grid<double>& roi, const PreprocessParams& p = {});

struct HoughParams {
  double canny_high = 100.0;
  double accumulator = 7.0;
  double radius_lo = 0.6;  // times the nominal dot radius in pixels
  double radius_hi = 1.4;
};

/// Splits a one-cell ROI (2 columns x 3 rows) into six equal squares and runs
/// the circle detector on each; a square holding at least one circle sets its bit.
CellPattern detect_dots(const Grid<std::uint8_t>& roi, const PlateSpec& spec, double px_per_mm,
                        const HoughParams& hough = {});

struct CellReading {
  CellPattern pattern;
  char character = ' ';
  double confidence = 0.0;  // share of frames that voted for the pattern
  int frames = 0;
};

struct ReadOptions {
  std::size_t batch_events = 20'000;
  double f_px = 600.0;
  double z_mm = kNominalMembraneDepthMm;
  int sensor_width = 640;
  int sensor_height = 480;
  PlateSpec plate;
  PreprocessParams preprocess;
  HoughParams hough;
  int threads = 0;
};

struct PlateReading {
  std::string text;
  std::vector<CellReading> cells;
  std::size_t frames = 0;
};

/// Batches of `batch_events` -> IWE frames -> cells located from the scan
/// kinematics -> per-frame decode -> majority vote per cell. Leading and
/// trailing blank cells are dropped.
PlateReading read_plate(std::span<const Event> events, double v_mm_s, const ReadOptions& opt = {});

/// (v / pitch) characters per second, 5 characters per word.
double wpm_metric(double v_mm_s, double cell_pitch_mm);

}  // namespace evtac::braille
