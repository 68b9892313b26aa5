#pragma once

#include <array>
#include <bitset>
#include <optional>
#include <stdexcept>
#include <string>

namespace evtac::braille {

/// Six dot flags ordered left-to-right, top-to-bottom:
/// bit string "b0b1b2b3b4b5" = (r1c1, r1c2, r2c1, r2c2, r3c1, r3c2).
/// Standard dot numbers map as 1->r1c1, 4->r1c2, 2->r2c1, 5->r2c2, 3->r3c1, 6->r3c2.
class CellPattern {
 public:
  CellPattern() = default;
  /// Parses "101000"-style strings.
  static std::optional<CellPattern> parse(const std::string& bits);
  static CellPattern from_dot_numbers(const std::string& dots);

  bool dot(int row, int col) const { return bits_[static_cast<std::size_t>(row * 2 + col)]; }
  void set_dot(int row, int col, bool on) { bits_[static_cast<std::size_t>(row * 2 + col)] = on; }
  bool empty() const { return bits_.none(); }
  int count() const { return static_cast<int>(bits_.count()); }
  std::string to_string() const;

  friend bool operator==(const CellPattern&, const CellPattern&) = default;

 private:
  std::bitset<6> bits_;
};

inline constexpr char kUnknownChar = '?';

/// Grade-1 English letters a-z plus space (blank cell). Unknown patterns map to '?'.
char decode(const CellPattern& p);
/// Upper-case letters fold to lower case. Throws std::invalid_argument for
/// anything else outside a-z and space.
CellPattern encode(char c);

inline std::optional<CellPattern> CellPattern::parse(const std::string& bits) {
  if (bits.size() != 6) return std::nullopt;
  CellPattern p;
  for (std::size_t i = 0; i < 6; ++i) {
    if (bits[i] != '0' && bits[i] != '1') return std::nullopt;
    p.bits_[i] = bits[i] == '1';
  }
  return p;
}

inline CellPattern CellPattern::from_dot_numbers(const std::string& dots) {
  static constexpr std::array<int, 7> kIndex = {-1, 0, 2, 4, 1, 3, 5};
  CellPattern p;
  for (char d : dots) {
    if (d >= '1' && d <= '6') p.bits_[static_cast<std::size_t>(kIndex[static_cast<std::size_t>(d - '0')])] = true;
  }
  return p;
}

inline std::string CellPattern::to_string() const {
  std::string s(6, '0');
  for (std::size_t i = 0; i < 6; ++i) s[i] = bits_[i] ? '1' : '0';
  return s;
}

namespace detail {
inline const std::array<const char*, 26>& letter_dots() {
  static const std::array<const char*, 26> kDots = {
      "1",    "12",   "14",    "145",  "15",   "124",  "1245", "125",  "24",
      "245",  "13",   "123",   "134",  "1345", "135",  "1234", "12345", "1235",
      "234",  "2345", "136",   "1236", "2456", "1346", "13456", "1356"};
  return kDots;
}
}  // namespace detail

inline char decode(const CellPattern& p) {
  if (p.empty()) return ' ';
  for (std::size_t i = 0; i < 26; ++i) {
    if (CellPattern::from_dot_numbers(detail::letter_dots()[i]) == p) return static_cast<char>('a' + i);
  }
  return kUnknownChar;
}

inline CellPattern encode(char c) {
  if (c == ' ') return {};
  if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  if (c < 'a' || c > 'z') throw std::invalid_argument(std::string("no Grade-1 cell for character '") + c + "'");
  return CellPattern::from_dot_numbers(detail::letter_dots()[static_cast<std::size_t>(c - 'a')]);
}

}  // namespace evtac::braille
