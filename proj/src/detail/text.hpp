#pragma once

#include <charconv>
#include <string>
#include <string_view>
#include <vector>

#include "stickslip/error.hpp"

namespace stickslip::detail {

template <typename T>
T parse_number(std::string_view text, std::size_t offset, const char *field) {
  T value{};
  const auto *first = text.data();
  const auto *last = text.data() + text.size();
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last)
    throw FormatError(ErrorKind::input_format, offset, std::string("bad ") + field + " value '" + std::string(text) + "'");
  return value;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> cells;
  while (true) {
    const auto comma = line.find(',');
    cells.push_back(line.substr(0, comma));
    if (comma == std::string_view::npos) break;
    line.remove_prefix(comma + 1);
  }
  return cells;
}

}  // namespace stickslip::detail
