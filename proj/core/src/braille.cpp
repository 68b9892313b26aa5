#include "evtac/braille.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>

#include <opencv2/imgproc.hpp>

#include "evtac/errors.hpp"
#include "evtac/parallel.hpp"

namespace evtac::braille {
namespace {

constexpr double kUsToS = 1e-6;

int nearest(double v) { return static_cast<int>(std::floor(v + 0.5)); }

cv::Mat as_mat(Grid<std::uint8_t>& g) { return {g.height(), g.width(), CV_8UC1, g.data()}; }
cv::Mat as_mat(const Grid<std::uint8_t>& g) {
  return {g.height(), g.width(), CV_8UC1, const_cast<std::uint8_t*>(g.data())};
}

// Linear interpolation into a sampled profile; zero outside.
double sample(const std::vector<double>& p, double x) {
  if (!(x >= 0.0) || x > static_cast<double>(p.size() - 1)) return 0.0;
  const auto i = static_cast<std::size_t>(x);
  if (i + 1 >= p.size()) return p[i];
  const double a = x - static_cast<double>(i);
  return (1.0 - a) * p[i] + a * p[i + 1];
}

std::vector<double> box_smooth(const std::vector<double>& p, int half) {
  std::vector<double> out(p.size(), 0.0);
  const auto n = static_cast<long>(p.size());
  for (long i = 0; i < n; ++i) {
    double s = 0.0;
    for (long j = std::max(0L, i - half); j <= std::min(n - 1, i + half); ++j) s += p[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(i)] = s;
  }
  return out;
}

// Offset in [0, period) maximising the summed profile at offset + k * period + tooth.
// Every Grade-1 letter has a dot in the top row and in the left column, so the
// first tooth carries extra weight. Without it a text that never uses the last
// row (or column) fits a comb shifted by one dot spacing equally well.
constexpr double kFirstToothWeight = 1.25;

double comb_offset(const std::vector<double>& p, double period, std::span<const double> teeth, bool periodic) {
  const double span = periodic ? period : static_cast<double>(p.size()) - teeth.back();
  double best = 0.0, best_score = -1.0;
  for (double o = 0.0; o < span; o += 0.25) {
    double score = 0.0;
    if (periodic) {
      for (double base = o; base < static_cast<double>(p.size()); base += period) {
        for (std::size_t i = 0; i < teeth.size(); ++i) {
          score += (i == 0 ? kFirstToothWeight : 1.0) * sample(p, base + teeth[i]);
        }
      }
    } else {
      for (std::size_t i = 0; i < teeth.size(); ++i) {
        score += (i == 0 ? kFirstToothWeight : 1.0) * sample(p, o + teeth[i]);
      }
    }
    if (score > best_score) {
      best_score = score;
      best = o;
    }
  }
  return best;
}

struct Batch {
  std::size_t begin = 0;
  std::size_t end = 0;
};

std::vector<Batch> make_batches(std::size_t n, std::size_t size) {
  std::vector<Batch> out;
  for (std::size_t b = 0; b < n; b += size) out.push_back({b, std::min(n, b + size)});
  return out;
}

}  // namespace

FlowEstimate estimate_flow(double v_mm_s, double f_px, double z_mm) {
  if (!(z_mm > 0.0)) throw ConfigError("depth must be positive", "z_mm");
  if (!std::isfinite(v_mm_s) || !std::isfinite(f_px)) throw ConfigError("non-finite flow input", "v_mm_s");
  return {-f_px * v_mm_s / z_mm, 0.0};
}

std::vector<WarpedEvent> warp_events(std::span<const Event> batch, const FlowEstimate& flow, TimeUs t_ref) {
  std::vector<WarpedEvent> out;
  out.reserve(batch.size());
  for (const Event& e : batch) {
    const double dt = static_cast<double>(e.t - t_ref) * kUsToS;
    out.push_back({static_cast<double>(e.x) - flow.du * dt, static_cast<double>(e.y) - flow.dv * dt});
  }
  return out;
}

Iwe accumulate_iwe(std::span<const WarpedEvent> warped, int width, int height, int x_origin, int y_origin) {
  if (width < 0 || height < 0) throw InvalidInputError("negative canvas size");
  Iwe iwe;
  iwe.counts = Grid<double>(width, height, 0.0);
  iwe.x_origin = x_origin;
  iwe.y_origin = y_origin;
  iwe.n_events = warped.size();
  for (const WarpedEvent& w : warped) {
    const int i = nearest(w.x) - x_origin;
    const int j = nearest(w.y) - y_origin;
    if (iwe.counts.contains(i, j)) {
      iwe.counts(i, j) += 1.0;
    } else {
      ++iwe.dropped;
    }
  }
  return iwe;
}

Iwe make_iwe(std::span<const Event> batch, const FlowEstimate& flow, int sensor_width, int sensor_height) {
  if (batch.empty()) {
    Iwe iwe;
    iwe.counts = Grid<double>(sensor_width, sensor_height, 0.0);
    return iwe;
  }
  const TimeUs t_ref = batch.front().t;
  const TimeUs t_last = batch.back().t;
  const double duration = static_cast<double>(t_last - t_ref) * kUsToS;
  const int extra_x = static_cast<int>(std::ceil(std::abs(flow.du) * duration));
  const int extra_y = static_cast<int>(std::ceil(std::abs(flow.dv) * duration));
  // Warping moves events against the flow, so the canvas grows on that side.
  const int x0 = flow.du > 0.0 ? -extra_x : 0;
  const int y0 = flow.dv > 0.0 ? -extra_y : 0;
  const auto warped = warp_events(batch, flow, t_ref);
  Iwe iwe = accumulate_iwe(warped, sensor_width + extra_x, sensor_height + extra_y, x0, y0);
  iwe.t_ref = t_ref;
  iwe.t_last = t_last;
  return iwe;
}

double image_variance(const Grid<double>& image) {
  if (image.empty()) throw UndefinedMetricError("variance of an empty image");
  const auto& v = image.values();
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  return var / static_cast<double>(v.size());
}

void PlateSpec::validate() const {
  if (!(dot_radius_mm > 0.0)) throw ConfigError("must be positive", "dot_radius_mm");
  if (!(dot_spacing_mm > 0.0)) throw ConfigError("must be positive", "dot_spacing_mm");
  if (!(cell_pitch_mm > 0.0)) throw ConfigError("must be positive", "cell_pitch_mm");
}

Grid<std::uint8_t> preprocess_roi(const Grid<double>& roi, const PreprocessParams& p) {
  if (roi.empty()) throw InvalidInputError("empty ROI");
  double peak = 0.0;
  for (double v : roi.values()) peak = std::max(peak, v);
  Grid<std::uint8_t> img(roi.width(), roi.height(), 0);
  if (!(peak > 0.0)) return img;
  for (std::size_t i = 0; i < roi.size(); ++i) {
    img.data()[i] = static_cast<std::uint8_t>(std::lround(std::clamp(roi.data()[i], 0.0, peak) / peak * 255.0));
  }
  cv::Mat src = as_mat(img);
  cv::Mat filtered;
  cv::bilateralFilter(src, filtered, p.bilateral_d, p.bilateral_sigma, p.bilateral_sigma);
  cv::Mat equalized;
  cv::createCLAHE(p.clahe_clip, cv::Size(p.clahe_tiles, p.clahe_tiles))->apply(filtered, equalized);
  // CLAHE lifts a flat image off zero; Otsu would then mark all of it foreground.
  double lo = 0.0, hi = 0.0;
  cv::minMaxLoc(equalized, &lo, &hi);
  if (lo == hi) return Grid<std::uint8_t>(roi.width(), roi.height(), 0);
  cv::Mat binary;
  cv::threshold(equalized, binary, 0, 255, cv::THRESH_BINARY | cv::THRESH_OTSU);
  const cv::Mat kernel = cv::getStructuringElement(cv::MORPH_RECT, cv::Size(p.morph_kernel, p.morph_kernel));
  cv::morphologyEx(binary, binary, cv::MORPH_OPEN, kernel);
  cv::morphologyEx(binary, binary, cv::MORPH_CLOSE, kernel);
  Grid<std::uint8_t> out(roi.width(), roi.height(), 0);
  binary.copyTo(as_mat(out));
  return out;
}

CellPattern detect_dots(const Grid<std::uint8_t>& roi, const PlateSpec& spec, double px_per_mm,
                        const HoughParams& hough) {
  spec.validate();
  if (!(px_per_mm > 0.0)) throw ConfigError("must be positive", "px_per_mm");
  CellPattern pattern;
  if (roi.width() < 2 || roi.height() < 3) return pattern;
  const cv::Mat img = as_mat(roi);
  const int sw = roi.width() / 2;
  const int sh = roi.height() / 3;
  const double r_px = spec.dot_radius_mm * px_per_mm;
  const int r_lo = std::max(1, static_cast<int>(std::floor(hough.radius_lo * r_px)));
  const int r_hi = std::max(r_lo, static_cast<int>(std::ceil(hough.radius_hi * r_px)));
  for (int row = 0; row < 3; ++row) {
    for (int col = 0; col < 2; ++col) {
      const cv::Mat square = img(cv::Rect(col * sw, row * sh, sw, sh));
      if (cv::countNonZero(square) == 0) continue;
      std::vector<cv::Vec3f> circles;
      cv::HoughCircles(square, circles, cv::HOUGH_GRADIENT, 1.0, std::max(sw, sh), hough.canny_high,
                       hough.accumulator, r_lo, r_hi);
      pattern.set_dot(row, col, !circles.empty());
    }
  }
  return pattern;
}

PlateReading read_plate(std::span<const Event> events, double v_mm_s, const ReadOptions& opt) {
  opt.plate.validate();
  if (opt.batch_events == 0) throw ConfigError("must be positive", "batch_events");
  if (!(opt.f_px > 0.0)) throw ConfigError("must be positive", "f_px");
  if (opt.sensor_width <= 0 || opt.sensor_height <= 0) throw ConfigError("must be positive", "sensor_width");
  PlateReading out;
  if (events.empty()) return out;
  if (!is_time_sorted(events)) throw InvalidInputError("event stream is not time-sorted");

  const FlowEstimate flow = estimate_flow(v_mm_s, opt.f_px, opt.z_mm);
  const double px_per_mm = opt.f_px / opt.z_mm;
  const double s_px = opt.plate.dot_spacing_mm * px_per_mm;
  const double pitch_px = opt.plate.cell_pitch_mm * px_per_mm;
  const int smooth = std::max(1, nearest(opt.plate.dot_radius_mm * px_per_mm));
  const auto batches = make_batches(events.size(), opt.batch_events);
  const TimeUs t0 = events.front().t;
  const int threads = resolve_threads(opt.threads);
  out.frames = batches.size();

  // Scene coordinate (pixels at t0) of warped column x in a frame referenced at t_ref.
  auto shift = [&](TimeUs t_ref) { return flow.du * static_cast<double>(t_ref - t0) * kUsToS; };

  // Pass 1: column and row profiles in scene coordinates.
  struct FrameProfile {
    TimeUs t_ref = 0;
    int x_origin = 0;
    std::vector<double> cols, rows;
  };
  std::vector<FrameProfile> profiles(batches.size());
  parallel_chunks(batches.size(), threads, [&](int, std::size_t b0, std::size_t b1) {
    for (std::size_t b = b0; b < b1; ++b) {
      const Iwe iwe = make_iwe(events.subspan(batches[b].begin, batches[b].end - batches[b].begin), flow,
                               opt.sensor_width, opt.sensor_height);
      FrameProfile& fp = profiles[b];
      fp.t_ref = iwe.t_ref;
      fp.x_origin = iwe.x_origin;
      fp.cols.assign(static_cast<std::size_t>(iwe.counts.width()), 0.0);
      fp.rows.assign(static_cast<std::size_t>(opt.sensor_height), 0.0);
      for (int y = 0; y < iwe.counts.height(); ++y) {
        const double* r = iwe.counts.row(y);
        for (int x = 0; x < iwe.counts.width(); ++x) {
          fp.cols[static_cast<std::size_t>(x)] += r[x];
          if (y - iwe.y_origin < opt.sensor_height) fp.rows[static_cast<std::size_t>(y)] += r[x];
        }
      }
    }
  });
  double g_lo = std::numeric_limits<double>::infinity(), g_hi = -g_lo;
  for (const FrameProfile& fp : profiles) {
    g_lo = std::min(g_lo, fp.x_origin - shift(fp.t_ref));
    g_hi = std::max(g_hi, fp.x_origin + static_cast<double>(fp.cols.size()) - shift(fp.t_ref));
  }
  const int g_base = static_cast<int>(std::floor(g_lo));
  std::vector<double> col_profile(static_cast<std::size_t>(std::ceil(g_hi) - g_base) + 1, 0.0);
  std::vector<double> row_profile(static_cast<std::size_t>(opt.sensor_height), 0.0);
  for (const FrameProfile& fp : profiles) {
    const int off = nearest(fp.x_origin - shift(fp.t_ref)) - g_base;
    for (std::size_t i = 0; i < fp.cols.size(); ++i) {
      const long g = off + static_cast<long>(i);
      if (g >= 0 && g < static_cast<long>(col_profile.size())) col_profile[static_cast<std::size_t>(g)] += fp.cols[i];
    }
    for (std::size_t y = 0; y < fp.rows.size(); ++y) row_profile[y] += fp.rows[y];
  }
  col_profile = box_smooth(col_profile, smooth);
  row_profile = box_smooth(row_profile, smooth);
  const std::array<double, 2> col_teeth{0.0, s_px};
  const std::array<double, 3> row_teeth{0.0, s_px, 2.0 * s_px};
  const double g_first = g_base + comb_offset(col_profile, pitch_px, col_teeth, true);
  const double row0 = row_profile.size() > static_cast<std::size_t>(2.0 * s_px) + 1
                          ? comb_offset(row_profile, 0.0, row_teeth, false)
                          : 0.0;
  const auto n_cells = static_cast<std::size_t>(std::max(0.0, std::floor((g_hi - g_first) / pitch_px)) + 1);

  // Pass 2: decode every cell that stays on the sensor for the whole batch.
  const int roi_w = std::max(2, nearest(2.0 * s_px));
  const int roi_h = std::max(3, nearest(3.0 * s_px));
  std::vector<std::vector<std::pair<std::size_t, CellPattern>>> per_frame(batches.size());
  parallel_chunks(batches.size(), threads, [&](int, std::size_t b0, std::size_t b1) {
    for (std::size_t b = b0; b < b1; ++b) {
      const Iwe iwe = make_iwe(events.subspan(batches[b].begin, batches[b].end - batches[b].begin), flow,
                               opt.sensor_width, opt.sensor_height);
      const double travel = std::abs(flow.du) * static_cast<double>(iwe.t_last - iwe.t_ref) * kUsToS;
      const double lo = flow.du < 0.0 ? travel : 0.0;
      const double hi = flow.du < 0.0 ? opt.sensor_width : opt.sensor_width - travel;
      const int top = nearest(row0 - 0.5 * s_px) - iwe.y_origin;
      if (top < 0 || top + roi_h > iwe.counts.height()) continue;
      for (std::size_t k = 0; k < n_cells; ++k) {
        const double x = g_first + static_cast<double>(k) * pitch_px + shift(iwe.t_ref);
        const int left = nearest(x - 0.5 * s_px);
        if (left < lo || left + roi_w > hi) continue;
        const int i0 = left - iwe.x_origin;
        if (i0 < 0 || i0 + roi_w > iwe.counts.width()) continue;
        Grid<double> roi(roi_w, roi_h);
        for (int y = 0; y < roi_h; ++y) {
          std::copy_n(iwe.counts.row(top + y) + i0, roi_w, roi.row(y));
        }
        per_frame[b].emplace_back(k, detect_dots(preprocess_roi(roi, opt.preprocess), opt.plate, px_per_mm, opt.hough));
      }
    }
  });

  std::vector<std::map<std::string, int>> votes(n_cells);
  for (const auto& frame : per_frame) {
    for (const auto& [k, p] : frame) ++votes[k][p.to_string()];
  }
  std::vector<CellReading> cells;
  for (const auto& v : votes) {
    if (v.empty()) continue;
    int total = 0;
    const std::pair<const std::string, int>* best = nullptr;
    for (const auto& entry : v) {
      total += entry.second;
      if (!best || entry.second > best->second) best = &entry;
    }
    CellReading c;
    c.pattern = *CellPattern::parse(best->first);
    c.character = decode(c.pattern);
    c.frames = total;
    c.confidence = static_cast<double>(best->second) / total;
    cells.push_back(c);
  }
  auto first = std::find_if(cells.begin(), cells.end(), [](const CellReading& c) { return !c.pattern.empty(); });
  auto last = std::find_if(cells.rbegin(), cells.rend(), [](const CellReading& c) { return !c.pattern.empty(); });
  if (first == cells.end()) return out;
  out.cells.assign(first, last.base());
  for (const CellReading& c : out.cells) out.text.push_back(c.character);
  return out;
}

double wpm_metric(double v_mm_s, double cell_pitch_mm) {
  if (!(v_mm_s >= 0.0) || !std::isfinite(v_mm_s)) throw ConfigError("must be non-negative", "v_mm_s");
  if (!(cell_pitch_mm > 0.0)) throw ConfigError("must be positive", "cell_pitch_mm");
  return v_mm_s / cell_pitch_mm * 60.0 / 5.0;
}

}  // namespace evtac::braille
