#pragma once

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "wsseg/error.hpp"
#include "wsseg/types.hpp"

namespace wsseg {

// Run-length text: whitespace-separated "start length" pairs, 1-indexed,
// row-major, sorted by start, non-overlapping. Runs mark ship pixels.

namespace detail {

inline std::vector<std::int64_t> parse_rle_tokens(std::string_view text) {
  std::vector<std::int64_t> out;
  std::size_t i = 0;
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    if (i >= text.size()) break;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    std::int64_t v = 0;
    auto token = text.substr(i, j - i);
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc{} || ptr != token.data() + token.size())
      throw ParseError("RLE token '" + std::string(token) + "' is not an integer");
    out.push_back(v);
    i = j;
  }
  if (out.size() % 2 != 0) throw ParseError("RLE has an odd number of tokens");
  return out;
}

}  // namespace detail

inline DenseMask decode_rle(std::string_view rle_text, int height, int width) {
  if (height <= 0 || width <= 0) throw ShapeError("RLE target shape must be positive");
  const auto tokens = detail::parse_rle_tokens(rle_text);
  const std::int64_t total = static_cast<std::int64_t>(height) * width;
  DenseMask mask(height, width);
  auto& data = mask.classes.data();
  std::int64_t prev_end = 0;  // one past the last pixel of the previous run, 1-indexed
  for (std::size_t k = 0; k < tokens.size(); k += 2) {
    const std::int64_t start = tokens[k];
    const std::int64_t length = tokens[k + 1];
    if (start < 1) throw ParseError("RLE start must be >= 1");
    if (length < 1) throw ParseError("RLE run length must be >= 1");
    if (start < prev_end)
      throw OverlapError("RLE run starting at " + std::to_string(start) +
                         " overlaps or precedes the previous run");
    if (start - 1 + length > total)
      throw BoundsError("RLE run " + std::to_string(start) + "+" + std::to_string(length) +
                        " exceeds " + std::to_string(total) + " pixels");
    for (std::int64_t p = start - 1; p < start - 1 + length; ++p) data[p] = kShip;
    prev_end = start + length;
  }
  return mask;
}

/// Canonical encoding: maximal runs of ship pixels in row-major order.
inline std::string encode_rle(const DenseMask& mask) {
  std::string out;
  const auto& data = mask.classes.data();
  std::size_t i = 0;
  while (i < data.size()) {
    if (data[i] != kShip) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < data.size() && data[j] == kShip) ++j;
    if (!out.empty()) out += ' ';
    out += std::to_string(i + 1) + ' ' + std::to_string(j - i);
    i = j;
  }
  return out;
}

}  // namespace wsseg
