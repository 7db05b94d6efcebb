#include "stickslip/aesthetics.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <json.hpp>
#include <ostream>

#include "detail/text.hpp"
#include "stickslip/catalog.hpp"
#include "stickslip/error.hpp"

namespace stickslip {

using nlohmann::json;

std::size_t BitMatrix::count() const { return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1)); }

void AestheticsConfig::validate() const {
  if (!(lit_threshold > 0.0 && lit_threshold <= 1.0))
    throw Error(ErrorKind::config, "aesthetics: lit_threshold must lie in (0, 1]");
  if (!(decay_per_tick >= 0.0 && decay_per_tick < 1.0))
    throw Error(ErrorKind::config, "aesthetics: decay_per_tick must lie in [0, 1)");
}

LightFrame LightFrame::dark(std::size_t rows, std::size_t cols) {
  LightFrame f;
  f.lit = BitMatrix(rows, cols);
  f.intensity.assign(rows * cols, 0.0);
  return f;
}

LightFrame light_update(const LightFrame &prev, const BitMatrix &slipped, double decay_per_tick,
                        double lit_threshold) {
  if (slipped.rows != prev.lit.rows || slipped.cols != prev.lit.cols || prev.intensity.size() != slipped.size())
    throw Error(ErrorKind::parameter, "light_update: slip matrix shape does not match the frame");
  if (!(decay_per_tick >= 0.0 && decay_per_tick < 1.0))
    throw Error(ErrorKind::parameter, "light_update: decay must lie in [0, 1)");
  LightFrame next;
  next.tick = prev.tick + 1;
  next.lit = BitMatrix(slipped.rows, slipped.cols);
  next.intensity.resize(slipped.size());
  for (std::size_t i = 0; i < slipped.size(); ++i) {
    next.intensity[i] = std::max(prev.intensity[i] * decay_per_tick, slipped.bits[i] ? 1.0 : 0.0);
    next.lit.bits[i] = next.intensity[i] >= lit_threshold ? 1 : 0;
  }
  return next;
}

double complexity_score(const BitMatrix &lit) {
  std::size_t pairs = 0;
  std::size_t differing = 0;
  for (std::size_t r = 0; r < lit.rows; ++r) {
    for (std::size_t c = 0; c < lit.cols; ++c) {
      if (c + 1 < lit.cols) {
        ++pairs;
        differing += lit.at(r, c) != lit.at(r, c + 1);
      }
      if (r + 1 < lit.rows) {
        ++pairs;
        differing += lit.at(r, c) != lit.at(r + 1, c);
      }
    }
  }
  return pairs == 0 ? 0.0 : static_cast<double>(differing) / static_cast<double>(pairs);
}

double order_score(const BitMatrix &lit) {
  const std::size_t R = lit.rows;
  const std::size_t C = lit.cols;
  if (lit.size() == 0) throw Error(ErrorKind::parameter, "order_score: empty matrix");
  std::size_t h = 0, v = 0, rot = 0, diag = 0;
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t c = 0; c < C; ++c) {
      const bool x = lit.at(r, c);
      h += x == lit.at(r, C - 1 - c);
      v += x == lit.at(R - 1 - r, c);
      rot += x == lit.at(R - 1 - r, C - 1 - c);
      if (R == C) diag += x == lit.at(c, r);
    }
  }
  const double n = static_cast<double>(lit.size());
  double sum = static_cast<double>(h) / n + static_cast<double>(v) / n + static_cast<double>(rot) / n;
  if (R == C) return (sum + static_cast<double>(diag) / n) / 4.0;
  return sum / 3.0;
}

AestheticScore birkhoff(const BitMatrix &lit) {
  AestheticScore s;
  s.order = order_score(lit);
  s.complexity = complexity_score(lit);
  if (s.complexity > 0.0) s.birkhoff = s.order / s.complexity;
  return s;
}

std::string to_hex(const BitMatrix &lit) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve((lit.size() + 3) / 4);
  for (std::size_t i = 0; i < lit.size(); i += 4) {
    unsigned nibble = 0;
    for (std::size_t k = 0; k < 4; ++k) nibble = (nibble << 1) | (i + k < lit.size() && lit.bits[i + k] ? 1u : 0u);
    out.push_back(digits[nibble]);
  }
  return out;
}

BitMatrix from_hex(const std::string &hex, std::size_t rows, std::size_t cols) {
  BitMatrix m(rows, cols);
  if (hex.size() != (m.size() + 3) / 4)
    throw Error(ErrorKind::input_format, "hex pattern has " + std::to_string(hex.size()) + " digits, expected " +
                                             std::to_string((m.size() + 3) / 4));
  for (std::size_t d = 0; d < hex.size(); ++d) {
    const char ch = hex[d];
    unsigned nibble;
    if (ch >= '0' && ch <= '9') nibble = static_cast<unsigned>(ch - '0');
    else if (ch >= 'a' && ch <= 'f') nibble = static_cast<unsigned>(ch - 'a' + 10);
    else if (ch >= 'A' && ch <= 'F') nibble = static_cast<unsigned>(ch - 'A' + 10);
    else throw Error(ErrorKind::input_format, std::string("bad hex digit '") + ch + "'");
    for (std::size_t k = 0; k < 4; ++k) {
      const std::size_t i = 4 * d + k;
      const bool bit = (nibble >> (3 - k)) & 1u;
      if (i < m.size()) m.bits[i] = bit ? 1 : 0;
      else if (bit) throw Error(ErrorKind::input_format, "hex pattern sets padding bits");
    }
  }
  return m;
}

std::string rle_encode(const BitMatrix &lit) {
  std::string out;
  std::uint8_t state = 0;
  std::size_t run = 0;
  for (auto b : lit.bits) {
    if (b == state) {
      ++run;
      continue;
    }
    out += std::to_string(run) + ',';
    state = b;
    run = 1;
  }
  out += std::to_string(run);
  return out;
}

BitMatrix rle_decode(const std::string &rle, std::size_t rows, std::size_t cols) {
  BitMatrix m(rows, cols);
  std::size_t pos = 0;
  std::uint8_t state = 0;
  for (auto cell : detail::split_csv(rle)) {
    const auto run = detail::parse_number<std::size_t>(cell, 0, "run length");
    if (pos + run > m.size()) throw Error(ErrorKind::input_format, "run lengths exceed the matrix size");
    std::fill_n(m.bits.begin() + static_cast<std::ptrdiff_t>(pos), run, state);
    pos += run;
    state ^= 1;
  }
  if (pos != m.size()) throw Error(ErrorKind::input_format, "run lengths do not cover the matrix");
  return m;
}

LightLogWriter::~LightLogWriter() {
  try {
    flush();
  } catch (...) {
  }
}

void LightLogWriter::push(std::uint64_t tick, const BitMatrix &lit) {
  if (pending_ && pending_->lit == lit && pending_->tick + repeat_ == tick) {
    ++repeat_;
    return;
  }
  flush();
  pending_ = LitRecord{tick, lit};
  repeat_ = 1;
}

void LightLogWriter::flush() {
  if (!pending_) return;
  const json line = {{"tick", pending_->tick},
                     {"rows", pending_->lit.rows},
                     {"cols", pending_->lit.cols},
                     {"lit", to_hex(pending_->lit)},
                     {"repeat", repeat_}};
  out_ << line.dump() << '\n';
  pending_.reset();
  repeat_ = 0;
}

std::vector<LitRecord> read_light_log(std::istream &in) {
  std::vector<LitRecord> out;
  std::string line;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    const std::size_t line_offset = offset;
    offset += line.size() + 1;
    if (line.empty() || line == "\r") continue;
    try {
      const auto rec = json::parse(line);
      const auto tick = rec.at("tick").get<std::uint64_t>();
      const auto rows = rec.at("rows").get<std::size_t>();
      const auto cols = rec.at("cols").get<std::size_t>();
      const auto repeat = rec.value("repeat", std::uint64_t{1});
      if (rows == 0 || cols == 0) throw FormatError(ErrorKind::input_format, line_offset, "light record with empty shape");
      if (repeat == 0) throw FormatError(ErrorKind::input_format, line_offset, "light record with repeat 0");
      if (!out.empty() && tick <= out.back().tick)
        throw FormatError(ErrorKind::input_format, line_offset, "light log ticks are not increasing");
      const auto lit = from_hex(rec.at("lit").get<std::string>(), rows, cols);
      for (std::uint64_t k = 0; k < repeat; ++k) out.push_back({tick + k, lit});
    } catch (const json::parse_error &e) {
      throw FormatError(ErrorKind::input_format, line_offset + (e.byte > 0 ? e.byte - 1 : 0), "light log line is not JSON");
    } catch (const FormatError &) {
      throw;
    } catch (const std::exception &e) {
      throw FormatError(ErrorKind::input_format, line_offset, std::string("bad light record: ") + e.what());
    }
  }
  return out;
}

void write_score_csv_header(std::ostream &out) { out << "tick,O,C,M\n"; }

void write_score_csv_row(std::ostream &out, std::uint64_t tick, const AestheticScore &score) {
  out << tick << ',' << format_double(score.order) << ',' << format_double(score.complexity) << ','
      << (score.birkhoff ? format_double(*score.birkhoff) : std::string("NaN")) << '\n';
}

}  // namespace stickslip
