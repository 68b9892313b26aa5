#include "evtac/image_io.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "evtac/errors.hpp"

namespace evtac {
namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  return out;
}

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in) {
  std::string tok;
  while (in >> tok) {
    if (tok[0] == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    return tok;
  }
  throw DataError("truncated image header");
}

}  // namespace

void write_pfm(const std::filesystem::path& path, const Grid<double>& image) {
  auto out = open_out(path);
  out << "Pf\n" << image.width() << ' ' << image.height() << "\n-1.0\n";
  std::vector<float> row(static_cast<std::size_t>(image.width()));
  for (int y = image.height() - 1; y >= 0; --y) {
    for (int x = 0; x < image.width(); ++x) row[x] = static_cast<float>(image(x, y));
    // Little-endian hosts only; the scale sign declares the byte order.
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
}

Grid<double> read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open PFM: " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "Pf") throw DataError("not a grayscale PFM file: " + path.string(), 0);
  int w = 0, h = 0;
  double scale = 0.0;
  in >> w >> h >> scale;
  in.get();
  if (!in || w <= 0 || h <= 0) throw DataError("bad PFM header: " + path.string());
  if (scale >= 0.0) throw DataError("big-endian PFM is not supported: " + path.string());
  Grid<double> img(w, h);
  std::vector<float> row(static_cast<std::size_t>(w));
  for (int y = h - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!in) throw DataError("truncated PFM data: " + path.string());
    for (int x = 0; x < w; ++x) img(x, y) = row[x];
  }
  return img;
}

void write_pgm(const std::filesystem::path& path, const Grid<std::uint8_t>& image) {
  auto out = open_out(path);
  out << "P5\n" << image.width() << ' ' << image.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.data()), static_cast<std::streamsize>(image.size()));
}

void write_pgm16(const std::filesystem::path& path, const Grid<std::uint16_t>& image) {
  auto out = open_out(path);
  out << "P5\n" << image.width() << ' ' << image.height() << "\n65535\n";
  std::vector<unsigned char> buf(image.size() * 2);
  for (std::size_t i = 0; i < image.size(); ++i) {
    buf[2 * i] = static_cast<unsigned char>(image.data()[i] >> 8);
    buf[2 * i + 1] = static_cast<unsigned char>(image.data()[i] & 0xFF);
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

Grid<std::uint8_t> read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open PGM: " + path.string());
  if (header_token(in) != "P5") throw DataError("not a binary PGM: " + path.string(), 0);
  const int w = std::stoi(header_token(in));
  const int h = std::stoi(header_token(in));
  const int maxval = std::stoi(header_token(in));
  in.get();
  if (w <= 0 || h <= 0 || maxval != 255) throw DataError("unsupported PGM layout: " + path.string());
  Grid<std::uint8_t> img(w, h);
  in.read(reinterpret_cast<char*>(img.data()), static_cast<std::streamsize>(img.size()));
  if (!in) throw DataError("truncated PGM data: " + path.string());
  return img;
}

void write_depth_map(const std::filesystem::path& stem, const DepthMap& map) {
  write_pfm(stem.string() + ".pfm", map.depth);
  Grid<std::uint8_t> mask(map.width(), map.height());
  for (std::size_t i = 0; i < mask.size(); ++i) mask.data()[i] = map.valid.data()[i] ? 255 : 0;
  write_pgm(stem.string() + "_mask.pgm", mask);
}

void write_confidence_pgm(const std::filesystem::path& path, const Grid<std::uint32_t>& counts) {
  Grid<std::uint16_t> img(counts.width(), counts.height());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    img.data()[i] = static_cast<std::uint16_t>(std::min<std::uint32_t>(counts.data()[i], 65535u));
  }
  write_pgm16(path, img);
}

}  // namespace evtac
