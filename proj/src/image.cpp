#include "roesl/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace roesl {
namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

// ---------------------------------------------------------------- PGM (P5)

int pgm_next_token(std::istream& in) {
  // Skips whitespace and '#' comments, returns the next integer.
  for (;;) {
    int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int value = -1;
  in >> value;
  return in ? value : -1;
}

Frame read_pgm(std::ifstream& in, const std::filesystem::path& path) {
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (magic[0] != 'P' || magic[1] != '5') fail("not a binary PGM file: " + path.string());
  const int w = pgm_next_token(in);
  const int h = pgm_next_token(in);
  const int maxval = pgm_next_token(in);
  if (w <= 0 || h <= 0) fail("bad PGM dimensions in " + path.string());
  if (maxval <= 0 || maxval > 255) fail("unsupported PGM maxval (want 8-bit) in " + path.string());
  in.get();  // single whitespace after maxval
  std::vector<uint8_t> raw(static_cast<size_t>(w) * h);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) fail("truncated PGM payload in " + path.string());

  Frame f;
  f.width = w;
  f.height = h;
  f.pixels.resize(raw.size());
  const double inv = 1.0 / maxval;
  for (size_t i = 0; i < raw.size(); ++i) f.pixels[i] = raw[i] * inv;
  return f;
}

// ------------------------------------------------------------------- PNG

struct PngReadCleanup {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReadCleanup() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
  }
};

Frame read_png(std::FILE* fp, const std::filesystem::path& path) {
  PngReadCleanup ctx;
  ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!ctx.png) fail("libpng init failed");
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.info) fail("libpng init failed");
  if (setjmp(png_jmpbuf(ctx.png))) fail("corrupt PNG file: " + path.string());

  png_init_io(ctx.png, fp);
  png_read_info(ctx.png, ctx.info);

  const png_uint_32 w = png_get_image_width(ctx.png, ctx.info);
  const png_uint_32 h = png_get_image_height(ctx.png, ctx.info);
  const int color = png_get_color_type(ctx.png, ctx.info);
  const int depth = png_get_bit_depth(ctx.png, ctx.info);

  // Normalize everything to 8-bit gray or RGB.
  if (depth == 16) png_set_strip_16(ctx.png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(ctx.png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(ctx.png);
  if (png_get_valid(ctx.png, ctx.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(ctx.png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(ctx.png);
  png_set_interlace_handling(ctx.png);
  png_read_update_info(ctx.png, ctx.info);

  const int channels = png_get_channels(ctx.png, ctx.info);
  if (channels != 1 && channels != 3)
    fail("unsupported PNG channel layout in " + path.string());

  std::vector<uint8_t> data(static_cast<size_t>(w) * h * channels);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = data.data() + static_cast<size_t>(y) * w * channels;
  png_read_image(ctx.png, rows.data());
  png_read_end(ctx.png, nullptr);

  Frame f;
  f.width = static_cast<int>(w);
  f.height = static_cast<int>(h);
  f.pixels.resize(static_cast<size_t>(w) * h);
  if (channels == 1) {
    for (size_t i = 0; i < f.pixels.size(); ++i) f.pixels[i] = data[i] / 255.0;
  } else {
    // BT.601 luma weights.
    for (size_t i = 0; i < f.pixels.size(); ++i) {
      const uint8_t* px = &data[i * 3];
      f.pixels[i] = (0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]) / 255.0;
    }
  }
  return f;
}

struct PngWriteCleanup {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWriteCleanup() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
  }
};

void png_vector_write(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::vector<uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + len);
}

void png_vector_flush(png_structp) {}

std::vector<uint8_t> to_bytes(const Frame& frame) {
  std::vector<uint8_t> bytes(frame.pixels.size());
  for (size_t i = 0; i < bytes.size(); ++i) {
    const double v = std::clamp(frame.pixels[i], 0.0, 1.0);
    bytes[i] = static_cast<uint8_t>(std::lround(v * 255.0));
  }
  return bytes;
}

}  // namespace

Frame Frame::blank(int width, int height, double value) {
  Frame f;
  f.width = width;
  f.height = height;
  f.pixels.assign(static_cast<size_t>(width) * height, value);
  return f;
}

void Frame::validate() const {
  if (width < 8 || height < 8)
    throw std::invalid_argument("frame dimensions must be at least 8x8, got " +
                                std::to_string(width) + "x" + std::to_string(height));
  if (pixels.size() != static_cast<size_t>(width) * height)
    throw std::invalid_argument("pixel buffer size does not match dimensions");
  for (double p : pixels)
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument("pixel intensity out of [0,1]");
}

void FrameSequence::validate() const {
  if (frames.size() < 2) throw std::invalid_argument("frame sequence needs at least 2 frames");
  for (size_t i = 0; i < frames.size(); ++i) {
    frames[i].validate();
    if (frames[i].width != width() || frames[i].height != height())
      throw std::invalid_argument("frame sequence has mixed dimensions");
    if (frames[i].index != static_cast<int>(i))
      throw std::invalid_argument("frame indices must be consecutive from 0");
  }
}

Frame read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open image file: " + path.string());
  char magic[2] = {0, 0};
  in.read(magic, 2);
  in.seekg(0);
  if (magic[0] == 'P' && magic[1] == '5') return read_pgm(in, path);
  if (static_cast<uint8_t>(magic[0]) == 0x89 && magic[1] == 'P') {
    in.close();
    std::FILE* fp = std::fopen(path.string().c_str(), "rb");
    if (!fp) fail("cannot open image file: " + path.string());
    try {
      Frame f = read_png(fp, path);
      std::fclose(fp);
      return f;
    } catch (...) {
      std::fclose(fp);
      throw;
    }
  }
  fail("unsupported image format (want PGM P5 or PNG): " + path.string());
}

void write_pgm(const Frame& frame, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write PGM file: " + path.string());
  out << "P5\n" << frame.width << " " << frame.height << "\n255\n";
  const auto bytes = to_bytes(frame);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<uint8_t> encode_png_gray(const Frame& frame) {
  std::vector<uint8_t> out;
  PngWriteCleanup ctx;
  ctx.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!ctx.png) fail("libpng init failed");
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.info) fail("libpng init failed");
  if (setjmp(png_jmpbuf(ctx.png))) fail("PNG encoding failed");

  png_set_write_fn(ctx.png, &out, png_vector_write, png_vector_flush);
  // Fixed compression settings so identical frames encode to identical bytes.
  png_set_compression_level(ctx.png, 6);
  png_set_IHDR(ctx.png, ctx.info, frame.width, frame.height, 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(ctx.png, ctx.info);

  const auto bytes = to_bytes(frame);
  std::vector<png_bytep> rows(frame.height);
  for (int y = 0; y < frame.height; ++y)
    rows[y] = const_cast<png_bytep>(bytes.data() + static_cast<size_t>(y) * frame.width);
  png_write_image(ctx.png, rows.data());
  png_write_end(ctx.png, nullptr);
  return out;
}

void write_png_gray(const Frame& frame, const std::filesystem::path& path) {
  const auto bytes = encode_png_gray(frame);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write PNG file: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

FrameSequence load_frames(const std::filesystem::path& source) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;

  if (fs::is_directory(source)) {
    for (const auto& entry : fs::directory_iterator(source)) {
      if (!entry.is_regular_file()) continue;
      auto ext = entry.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
      if (ext == ".pgm" || ext == ".png") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
    if (files.empty()) fail("no PGM/PNG frames found in directory: " + source.string());
  } else if (fs::is_regular_file(source)) {
    std::ifstream in(source);
    if (!in) fail("cannot open manifest: " + source.string());
    const fs::path base = source.parent_path();
    std::string line;
    while (std::getline(in, line)) {
      while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      fs::path p(line);
      files.push_back(p.is_absolute() ? p : base / p);
    }
    if (files.empty()) fail("manifest lists no frames: " + source.string());
  } else {
    fail("frame source does not exist: " + source.string());
  }

  if (files.size() < 2) fail("need at least 2 frames, found " + std::to_string(files.size()) +
                             " in " + source.string());

  FrameSequence seq;
  seq.frames.reserve(files.size());
  for (size_t i = 0; i < files.size(); ++i) {
    Frame f = read_image(files[i]);
    f.index = static_cast<int>(i);
    if (i > 0 && (f.width != seq.width() || f.height != seq.height())) {
      std::ostringstream os;
      os << "frame dimension mismatch: " << files[i].string() << " is " << f.width << "x"
         << f.height << " but " << files[0].string() << " is " << seq.width() << "x" << seq.height();
      fail(os.str());
    }
    seq.frames.push_back(std::move(f));
  }
  seq.validate();
  return seq;
}

}  // namespace roesl
