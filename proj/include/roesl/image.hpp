#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace roesl {

// Grayscale frame, row-major, intensities in [0,1].
struct Frame {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;
  int index = 0;

  double at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }
  double& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }

  static Frame blank(int width, int height, double value = 0.0);
  void validate() const;  // throws std::invalid_argument on any broken invariant
};

struct FrameSequence {
  std::vector<Frame> frames;

  size_t size() const { return frames.size(); }
  int width() const { return frames.empty() ? 0 : frames.front().width; }
  int height() const { return frames.empty() ? 0 : frames.front().height; }
  void validate() const;
};

// Single-image IO. Format is detected from the file's magic bytes
// (binary PGM "P5" or PNG). RGB PNGs are converted to luma.
Frame read_image(const std::filesystem::path& path);
void write_pgm(const Frame& frame, const std::filesystem::path& path);

// In-memory PNG encoding (8-bit gray), used for VLM image payloads.
std::vector<uint8_t> encode_png_gray(const Frame& frame);
void write_png_gray(const Frame& frame, const std::filesystem::path& path);

// Loads a frame sequence from either a directory of image files (ordered by
// lexicographic filename) or a newline-separated manifest of paths resolved
// relative to the manifest's directory.
FrameSequence load_frames(const std::filesystem::path& source);

}  // namespace roesl
