#include "stickslip/wav.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>

#include "stickslip/error.hpp"

namespace stickslip {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void need(std::size_t offset, std::size_t n, const char *what) const {
    if (offset + n > bytes_.size())
      throw FormatError(ErrorKind::input_format, offset, std::string("truncated WAV: missing ") + what);
  }
  std::uint16_t u16(std::size_t offset) const {
    need(offset, 2, "16-bit field");
    return static_cast<std::uint16_t>(bytes_[offset] | (bytes_[offset + 1] << 8));
  }
  std::uint32_t u32(std::size_t offset) const {
    need(offset, 4, "32-bit field");
    return static_cast<std::uint32_t>(bytes_[offset]) | (static_cast<std::uint32_t>(bytes_[offset + 1]) << 8) |
           (static_cast<std::uint32_t>(bytes_[offset + 2]) << 16) |
           (static_cast<std::uint32_t>(bytes_[offset + 3]) << 24);
  }
  bool tag(std::size_t offset, const char *id) const {
    need(offset, 4, "chunk id");
    return std::memcmp(bytes_.data() + offset, id, 4) == 0;
  }
  std::size_t size() const { return bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
};

void put_u16(std::vector<std::uint8_t> &out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t> &out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_tag(std::vector<std::uint8_t> &out, const char *id) { out.insert(out.end(), id, id + 4); }

std::vector<std::uint8_t> header(std::uint16_t format, std::uint16_t channels, std::uint32_t rate,
                                 std::uint16_t bits, std::uint32_t data_bytes) {
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  const std::uint16_t block = static_cast<std::uint16_t>(channels * bits / 8);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, format);
  put_u16(out, channels);
  put_u32(out, rate);
  put_u32(out, rate * block);
  put_u16(out, block);
  put_u16(out, bits);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  return out;
}

std::int16_t quantise(double x) {
  const double clamped = std::clamp(x, -1.0, 1.0);
  return static_cast<std::int16_t>(std::lround(clamped * 32767.0));
}

}  // namespace

MonoAudio decode_wav(std::span<const std::uint8_t> bytes) {
  const Reader in(bytes);
  if (bytes.size() < 12) throw FormatError(ErrorKind::input_format, bytes.size(), "truncated WAV header");
  if (!in.tag(0, "RIFF")) throw FormatError(ErrorKind::input_format, 0, "not a RIFF file");
  if (!in.tag(8, "WAVE")) throw FormatError(ErrorKind::input_format, 8, "RIFF file is not WAVE");

  struct Format {
    std::uint16_t code;
    std::uint16_t channels;
    std::uint32_t rate;
    std::uint16_t block;
    std::uint16_t bits;
    std::size_t offset;
  };
  std::optional<Format> fmt;
  std::size_t pos = 12;
  while (pos + 8 <= in.size()) {
    const std::uint32_t chunk_size = in.u32(pos + 4);
    const std::size_t body = pos + 8;
    if (in.tag(pos, "fmt ")) {
      if (chunk_size < 16) throw FormatError(ErrorKind::input_format, pos, "fmt chunk too small");
      in.need(body, chunk_size, "fmt chunk body");
      Format f{in.u16(body), in.u16(body + 2), in.u32(body + 4), in.u16(body + 12), in.u16(body + 14), pos};
      if (f.code == kFormatExtensible) {
        if (chunk_size < 40) throw FormatError(ErrorKind::input_format, pos, "extensible fmt chunk too small");
        f.code = in.u16(body + 24);
      }
      if (f.code != kFormatPcm && f.code != kFormatFloat)
        throw FormatError(ErrorKind::input_format, body, "unsupported (compressed) WAV codec " + std::to_string(f.code));
      if ((f.code == kFormatPcm && f.bits != 16) || (f.code == kFormatFloat && f.bits != 32))
        throw FormatError(ErrorKind::input_format, body + 14,
                          "unsupported sample width " + std::to_string(f.bits) + " bits");
      if (f.channels != 1 && f.channels != 2)
        throw FormatError(ErrorKind::input_format, body + 2, "unsupported channel count " + std::to_string(f.channels));
      if (f.rate == 0) throw FormatError(ErrorKind::input_format, body + 4, "zero sample rate");
      if (f.block != f.channels * f.bits / 8) throw FormatError(ErrorKind::input_format, body + 12, "inconsistent block alignment");
      fmt = f;
    } else if (in.tag(pos, "data")) {
      if (!fmt) throw FormatError(ErrorKind::input_format, pos, "data chunk precedes fmt chunk");
      if (body + chunk_size > in.size())
        throw FormatError(ErrorKind::input_format, in.size(),
                          "truncated WAV: data chunk declares " + std::to_string(chunk_size) + " bytes, " +
                              std::to_string(in.size() - body) + " present");
      if (chunk_size % fmt->block != 0)
        throw FormatError(ErrorKind::input_format, body + chunk_size - chunk_size % fmt->block,
                          "data chunk ends mid-frame");
      MonoAudio audio;
      audio.sample_rate = fmt->rate;
      const std::size_t frames = chunk_size / fmt->block;
      audio.samples.resize(frames);
      const auto *data = bytes.data() + body;
      for (std::size_t i = 0; i < frames; ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < fmt->channels; ++c) {
          const auto *p = data + i * fmt->block + c * (fmt->bits / 8);
          double x;
          if (fmt->code == kFormatPcm) {
            const auto raw = static_cast<std::int16_t>(static_cast<std::uint16_t>(p[0] | (p[1] << 8)));
            x = static_cast<double>(raw) / 32768.0;
          } else {
            std::uint32_t raw = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                                (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
            const float f = std::bit_cast<float>(raw);
            if (!std::isfinite(f))
              throw FormatError(ErrorKind::input_format, static_cast<std::size_t>(p - bytes.data()), "non-finite float sample");
            x = std::clamp(static_cast<double>(f), -1.0, 1.0);
          }
          acc += x;
        }
        audio.samples[i] = fmt->channels == 2 ? 0.5 * acc : acc;
      }
      return audio;
    }
    pos = body + chunk_size + (chunk_size & 1u);
  }
  throw FormatError(ErrorKind::input_format, std::min(pos, in.size()), fmt ? "missing data chunk" : "missing fmt chunk");
}

MonoAudio load_audio(const std::string &path) {
  const auto bytes = read_file(path);
  return decode_wav(bytes);
}

std::vector<std::uint8_t> encode_wav16(const StereoAudio &audio) {
  if (audio.left.size() != audio.right.size()) throw Error(ErrorKind::parameter, "stereo channels differ in length");
  const auto frames = static_cast<std::uint32_t>(audio.left.size());
  auto out = header(kFormatPcm, 2, audio.sample_rate, 16, frames * 4);
  for (std::uint32_t i = 0; i < frames; ++i) {
    put_u16(out, static_cast<std::uint16_t>(quantise(audio.left[i])));
    put_u16(out, static_cast<std::uint16_t>(quantise(audio.right[i])));
  }
  return out;
}

std::vector<std::uint8_t> encode_wav16(const MonoAudio &audio) {
  const auto frames = static_cast<std::uint32_t>(audio.samples.size());
  auto out = header(kFormatPcm, 1, audio.sample_rate, 16, frames * 2);
  for (double x : audio.samples) put_u16(out, static_cast<std::uint16_t>(quantise(x)));
  return out;
}

std::vector<std::uint8_t> encode_wav_float(std::span<const float> interleaved, std::uint32_t sample_rate,
                                           std::uint16_t channels) {
  auto out = header(kFormatFloat, channels, sample_rate, 32, static_cast<std::uint32_t>(interleaved.size() * 4));
  for (float f : interleaved) put_u32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

void write_file(const std::string &path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::input_format, "cannot write '" + path + "'");
  out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint8_t> read_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::input_format, "cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

MonoAudio resample(const MonoAudio &audio, std::uint32_t target_rate) {
  if (audio.sample_rate == target_rate || audio.samples.empty()) {
    MonoAudio copy = audio;
    copy.sample_rate = target_rate;
    return copy;
  }
  MonoAudio out;
  out.sample_rate = target_rate;
  const double ratio = static_cast<double>(audio.sample_rate) / static_cast<double>(target_rate);
  const auto n = static_cast<std::size_t>(std::floor(static_cast<double>(audio.samples.size() - 1) / ratio)) + 1;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double src = static_cast<double>(i) * ratio;
    const auto k = static_cast<std::size_t>(src);
    const double frac = src - static_cast<double>(k);
    const double a = audio.samples[k];
    const double b = k + 1 < audio.samples.size() ? audio.samples[k + 1] : a;
    out.samples[i] = a + frac * (b - a);
  }
  return out;
}

}  // namespace stickslip
