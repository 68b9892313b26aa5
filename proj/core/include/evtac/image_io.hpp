#pragma once

#include <cstdint>
#include <filesystem>

#include "evtac/depth_map.hpp"
#include "evtac/grid.hpp"

namespace evtac {

/// Little-endian PFM ("Pf", scale -1). Rows are stored bottom-to-top as the
/// format requires; the in-memory grid is top-to-bottom.
void write_pfm(const std::filesystem::path& path, const Grid<double>& image);
Grid<double> read_pfm(const std::filesystem::path& path);

/// Binary PGM (P5). 8-bit grids are written verbatim.
void write_pgm(const std::filesystem::path& path, const Grid<std::uint8_t>& image);
/// 16-bit PGM (maxval 65535, big-endian samples as the format requires).
void write_pgm16(const std::filesystem::path& path, const Grid<std::uint16_t>& image);
Grid<std::uint8_t> read_pgm(const std::filesystem::path& path);

/// Depth as `<stem>.pfm` plus validity mask `<stem>_mask.pgm` (255 = valid).
void write_depth_map(const std::filesystem::path& stem, const DepthMap& map);

/// Saturating conversion of a count image to 16-bit PGM.
void write_confidence_pgm(const std::filesystem::path& path, const Grid<std::uint32_t>& counts);

}  // namespace evtac
