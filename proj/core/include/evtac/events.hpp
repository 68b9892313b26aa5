#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "evtac/geometry.hpp"

namespace evtac {

struct Event {
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::int8_t polarity = 1;  // -1 or +1
  TimeUs t = 0;

  friend bool operator==(const Event&, const Event&) = default;
};

using EventStream = std::vector<Event>;

/// Total order used wherever streams are merged: time, then row, column, polarity.
inline bool event_before(const Event& a, const Event& b) {
  if (a.t != b.t) return a.t < b.t;
  if (a.y != b.y) return a.y < b.y;
  if (a.x != b.x) return a.x < b.x;
  return a.polarity < b.polarity;
}

bool is_time_sorted(std::span<const Event> events);

/// Events with t in [t_begin, t_end] of a time-sorted stream.
std::span<const Event> time_slice(std::span<const Event> sorted, TimeUs t_begin, TimeUs t_end);

// Binary event file: a 16-byte header ("EVTAC16\0" magic, u32 version, u16 width,
// u16 height) followed by 16-byte little-endian records
//   u16 x | u16 y | i8 p | 3 pad bytes | i64 t_us
inline constexpr std::size_t kEventRecordBytes = 16;
inline constexpr std::size_t kEventHeaderBytes = 16;

struct EventFileInfo {
  int width = 0;
  int height = 0;
};

void write_events_binary(const std::filesystem::path& path, std::span<const Event> events,
                         EventFileInfo info = {});
/// Throws DataError naming the byte offset of the first malformed record.
EventStream read_events_binary(const std::filesystem::path& path, EventFileInfo* info = nullptr);

/// Debug CSV with header `t_us,x,y,p`.
void write_events_csv(const std::filesystem::path& path, std::span<const Event> events);
EventStream read_events_csv(const std::filesystem::path& path);

}  // namespace evtac
