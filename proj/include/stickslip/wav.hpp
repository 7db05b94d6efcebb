#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace stickslip {

struct MonoAudio {
  std::uint32_t sample_rate = 44100;
  std::vector<double> samples;  // in [-1, 1]
};

/// Decodes a PCM WAV (16-bit integer or 32-bit float, mono or stereo).
/// Stereo is averaged to mono; integers are scaled by 1/32768. Throws
/// FormatError with the offending byte offset on anything else.
MonoAudio decode_wav(std::span<const std::uint8_t> bytes);
MonoAudio load_audio(const std::string &path);

/// Interleaved stereo, samples in [-1, 1].
struct StereoAudio {
  std::uint32_t sample_rate = 44100;
  std::vector<double> left;
  std::vector<double> right;
};

/// 16-bit PCM stereo encoding; samples are rounded to the nearest step of
/// 1/32767 and clamped.
std::vector<std::uint8_t> encode_wav16(const StereoAudio &audio);

/// 16-bit PCM mono encoding.
std::vector<std::uint8_t> encode_wav16(const MonoAudio &audio);

/// 32-bit float encoding with `channels` interleaved channels.
std::vector<std::uint8_t> encode_wav_float(std::span<const float> interleaved, std::uint32_t sample_rate,
                                           std::uint16_t channels);

void write_file(const std::string &path, std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> read_file(const std::string &path);

/// Linear-interpolation resampling.
MonoAudio resample(const MonoAudio &audio, std::uint32_t target_rate);

}  // namespace stickslip
