#include "evtac/events.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "evtac/errors.hpp"

namespace evtac {
namespace {

constexpr std::array<char, 8> kMagic = {'E', 'V', 'T', 'A', 'C', '1', '6', '\0'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put_le(unsigned char* dst, T v) {
  using U = std::make_unsigned_t<T>;
  U u = static_cast<U>(v);
  for (std::size_t i = 0; i < sizeof(T); ++i) dst[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xFFu);
}

template <class T>
T get_le(const unsigned char* src) {
  using U = std::make_unsigned_t<T>;
  U u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(src[i]) << (8 * i);
  return static_cast<T>(u);
}

}  // namespace

bool is_time_sorted(std::span<const Event> events) {
  return std::is_sorted(events.begin(), events.end(),
                        [](const Event& a, const Event& b) { return a.t < b.t; });
}

std::span<const Event> time_slice(std::span<const Event> sorted, TimeUs t_begin, TimeUs t_end) {
  auto lo = std::lower_bound(sorted.begin(), sorted.end(), t_begin,
                             [](const Event& e, TimeUs t) { return e.t < t; });
  auto hi = std::upper_bound(lo, sorted.end(), t_end, [](TimeUs t, const Event& e) { return t < e.t; });
  return sorted.subspan(static_cast<std::size_t>(lo - sorted.begin()), static_cast<std::size_t>(hi - lo));
}

void write_events_binary(const std::filesystem::path& path, std::span<const Event> events,
                         EventFileInfo info) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open event file for writing: " + path.string());

  std::array<unsigned char, kEventHeaderBytes> header{};
  std::memcpy(header.data(), kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(header.data() + 8, kVersion);
  put_le<std::uint16_t>(header.data() + 12, static_cast<std::uint16_t>(info.width));
  put_le<std::uint16_t>(header.data() + 14, static_cast<std::uint16_t>(info.height));
  out.write(reinterpret_cast<const char*>(header.data()), header.size());

  std::vector<unsigned char> buf(events.size() * kEventRecordBytes, 0);
  for (std::size_t i = 0; i < events.size(); ++i) {
    unsigned char* r = buf.data() + i * kEventRecordBytes;
    put_le<std::uint16_t>(r, events[i].x);
    put_le<std::uint16_t>(r + 2, events[i].y);
    r[4] = static_cast<unsigned char>(events[i].polarity);
    put_le<std::int64_t>(r + 8, events[i].t);
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("failed writing event file: " + path.string());
}

EventStream read_events_binary(const std::filesystem::path& path, EventFileInfo* info) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open event file: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < kEventHeaderBytes) throw DataError("truncated event file header", 0);
  if (std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) throw DataError("bad event file magic", 0);
  if (get_le<std::uint32_t>(bytes.data() + 8) != kVersion) throw DataError("unsupported event file version", 8);
  if (info) {
    info->width = get_le<std::uint16_t>(bytes.data() + 12);
    info->height = get_le<std::uint16_t>(bytes.data() + 14);
  }

  const std::size_t payload = bytes.size() - kEventHeaderBytes;
  const std::size_t n = payload / kEventRecordBytes;
  if (payload % kEventRecordBytes != 0) {
    throw DataError("truncated event record", kEventHeaderBytes + n * kEventRecordBytes);
  }

  EventStream events(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t offset = kEventHeaderBytes + i * kEventRecordBytes;
    const unsigned char* r = bytes.data() + offset;
    Event e;
    e.x = get_le<std::uint16_t>(r);
    e.y = get_le<std::uint16_t>(r + 2);
    e.polarity = static_cast<std::int8_t>(r[4]);
    e.t = get_le<std::int64_t>(r + 8);
    if (e.polarity != 1 && e.polarity != -1) throw DataError("invalid polarity", offset + 4);
    if (i > 0 && e.t < events[i - 1].t) throw DataError("timestamps not sorted", offset + 8);
    events[i] = e;
  }
  return events;
}

void write_events_csv(const std::filesystem::path& path, std::span<const Event> events) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open event CSV for writing: " + path.string());
  out << "t_us,x,y,p\n";
  for (const auto& e : events) out << e.t << ',' << e.x << ',' << e.y << ',' << int(e.polarity) << '\n';
}

EventStream read_events_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open event CSV: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("t_us,x,y,p", 0) != 0) {
    throw DataError("event CSV must start with header t_us,x,y,p", 0);
  }
  EventStream events;
  std::uint64_t offset = line.size() + 1;
  while (std::getline(in, line)) {
    if (!line.empty()) {
      long long t = 0;
      int x = 0, y = 0, p = 0;
      char c1 = 0, c2 = 0, c3 = 0;
      std::istringstream ss(line);
      if (!(ss >> t >> c1 >> x >> c2 >> y >> c3 >> p) || c1 != ',' || c2 != ',' || c3 != ',' ||
          (p != 1 && p != -1) || x < 0 || y < 0 || x > 65535 || y > 65535) {
        throw DataError("malformed event CSV line", offset);
      }
      if (!events.empty() && t < events.back().t) throw DataError("timestamps not sorted", offset);
      events.push_back({static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y),
                        static_cast<std::int8_t>(p), t});
    }
    offset += line.size() + 1;
  }
  return events;
}

}  // namespace evtac
