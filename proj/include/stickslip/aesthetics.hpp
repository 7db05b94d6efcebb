#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace stickslip {

/// Row-major binary matrix.
struct BitMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> bits;

  BitMatrix() = default;
  BitMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), bits(r * c, 0) {}

  bool at(std::size_t r, std::size_t c) const { return bits[r * cols + c] != 0; }
  void set(std::size_t r, std::size_t c, bool v) { bits[r * cols + c] = v ? 1 : 0; }
  std::size_t size() const { return bits.size(); }
  std::size_t count() const;

  bool operator==(const BitMatrix &) const = default;
};

struct AestheticsConfig {
  double lit_threshold = 0.5;
  double decay_per_tick = 0.85;

  void validate() const;
};

struct LightFrame {
  std::uint64_t tick = 0;
  BitMatrix lit;
  std::vector<double> intensity;  // row-major, [0, 1]

  static LightFrame dark(std::size_t rows, std::size_t cols);
};

/// intensity = max(prev * decay, slipped ? 1 : 0); lit = intensity >= threshold.
/// The tick advances by one. Throws Error(parameter) on a shape mismatch or
/// decay outside [0, 1).
LightFrame light_update(const LightFrame &prev, const BitMatrix &slipped, double decay_per_tick,
                        double lit_threshold = 0.5);

/// Fraction of 4-neighbour adjacent pairs whose states differ. A matrix with
/// no adjacent pairs scores 0.
double complexity_score(const BitMatrix &lit);

/// Mean over the horizontal mirror, vertical mirror, 180-degree rotation and,
/// for square matrices, the main-diagonal transpose, of the fraction of cells
/// equal to their image.
double order_score(const BitMatrix &lit);

struct AestheticScore {
  double order = 0.0;
  double complexity = 0.0;
  std::optional<double> birkhoff;  // empty when complexity is 0

  bool defined() const { return birkhoff.has_value(); }
};

AestheticScore birkhoff(const BitMatrix &lit);

/// Hex form of the bits, row-major, packed most significant bit first into
/// nibbles; the final nibble is zero-padded.
std::string to_hex(const BitMatrix &lit);
BitMatrix from_hex(const std::string &hex, std::size_t rows, std::size_t cols);

/// Run lengths of the row-major bit sequence, comma separated, starting with
/// a run of unlit cells (possibly 0). "25" is an all-dark 5x5 frame.
std::string rle_encode(const BitMatrix &lit);
BitMatrix rle_decode(const std::string &rle, std::size_t rows, std::size_t cols);

struct LitRecord {
  std::uint64_t tick = 0;
  BitMatrix lit;
};

/// Light-frame log as JSON lines: {"tick", "rows", "cols", "lit", "repeat"}.
/// A record with repeat k stands for ticks tick .. tick + k - 1 sharing the
/// pattern; consecutive identical frames are folded into one line.
class LightLogWriter {
 public:
  explicit LightLogWriter(std::ostream &out) : out_(out) {}
  ~LightLogWriter();

  void push(std::uint64_t tick, const BitMatrix &lit);
  void flush();

 private:
  std::ostream &out_;
  std::optional<LitRecord> pending_;
  std::uint64_t repeat_ = 0;
};

/// Expands repeats back to one record per tick. Throws FormatError with the
/// byte offset of a malformed line.
std::vector<LitRecord> read_light_log(std::istream &in);

/// CSV with header tick,O,C,M; an undefined M is written as NaN.
void write_score_csv_header(std::ostream &out);
void write_score_csv_row(std::ostream &out, std::uint64_t tick, const AestheticScore &score);

}  // namespace stickslip
