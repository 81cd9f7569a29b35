#pragma once

// Frames, videos, synthetic content, PPM/PGM + manifest I/O and block grids.

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dia/error.hpp"
#include "dia/rng.hpp"

namespace dia {

/// One 8-bit image, row-major with interleaved channels.
struct Frame {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;

  Frame() = default;

  Frame(int w, int h, int c, std::uint8_t fill = 0) : width(w), height(h), channels(c) {
    check_shape();
    pixels.assign(sample_count(), fill);
  }

  Frame(int w, int h, int c, std::vector<std::uint8_t> samples)
      : width(w), height(h), channels(c), pixels(std::move(samples)) {
    check_shape();
    require(pixels.size() == sample_count(), ErrorKind::dimension,
            "pixel buffer length does not match width x height x channels");
  }

  std::size_t sample_count() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height) *
           static_cast<std::size_t>(channels);
  }

  std::size_t offset(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
            static_cast<std::size_t>(x)) * static_cast<std::size_t>(channels) +
           static_cast<std::size_t>(c);
  }

  std::uint8_t& at(int x, int y, int c) { return pixels[offset(x, y, c)]; }
  std::uint8_t at(int x, int y, int c) const { return pixels[offset(x, y, c)]; }

  bool same_shape(const Frame& other) const {
    return width == other.width && height == other.height && channels == other.channels;
  }

  friend bool operator==(const Frame&, const Frame&) = default;

 private:
  void check_shape() const {
    require(width > 0 && height > 0, ErrorKind::parameter, "frame dimensions must be positive");
    require(channels == 1 || channels == 3, ErrorKind::parameter, "frame channels must be 1 or 3");
  }
};

struct Video {
  std::string id;
  double fps = 25.0;
  std::vector<Frame> frames;

  int width() const { return frames.front().width; }
  int height() const { return frames.front().height; }
  int channels() const { return frames.front().channels; }
  int frame_count() const { return static_cast<int>(frames.size()); }

  void validate() const {
    require(!frames.empty(), ErrorKind::parameter, "T >= 1 violated: video has no frames");
    for (const auto& f : frames) {
      require(f.same_shape(frames.front()), ErrorKind::dimension,
              "video '" + id + "': frames differ in width/height/channels");
    }
  }

  friend bool operator==(const Video&, const Video&) = default;
};

/// Raw frame samples concatenated in frame order. This is the byte stream
/// whose entropy stands for H(X) in the byte domain.
inline std::vector<std::uint8_t> canonical_bytes(const Video& video) {
  std::vector<std::uint8_t> out;
  std::size_t total = 0;
  for (const auto& f : video.frames) total += f.pixels.size();
  out.reserve(total);
  for (const auto& f : video.frames) out.insert(out.end(), f.pixels.begin(), f.pixels.end());
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic content

enum class Motif { constant, moving_square, noise, gradient_drift };

inline std::string_view to_string(Motif m) {
  switch (m) {
    case Motif::constant: return "constant";
    case Motif::moving_square: return "moving_square";
    case Motif::noise: return "noise";
    case Motif::gradient_drift: return "gradient_drift";
  }
  return "?";
}

inline Motif motif_from_string(std::string_view s) {
  for (Motif m : {Motif::constant, Motif::moving_square, Motif::noise, Motif::gradient_drift}) {
    if (to_string(m) == s) return m;
  }
  throw Error(ErrorKind::parameter, "unknown motif '" + std::string(s) + "'");
}

struct SyntheticSpec {
  int width = 64;
  int height = 64;
  int channels = 3;
  int frame_count = 16;
  Motif motif = Motif::moving_square;
};

struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  bool contains(int px, int py) const { return px >= x && px < x + w && py >= y && py < y + h; }
  bool intersects(const Rect& o) const {
    return x < o.x + o.w && o.x < x + w && y < o.y + o.h && o.y < y + h;
  }
  long long area() const { return static_cast<long long>(w) * h; }

  friend bool operator==(const Rect&, const Rect&) = default;
};

namespace detail {

struct SquarePlan {
  int side;
  int row_y;
  int start_slot;
  int slots;
};

inline SquarePlan plan_square(const SyntheticSpec& spec, Rng& rng) {
  SquarePlan p{};
  p.side = std::max(2, std::min(spec.width, spec.height) / 4);
  p.slots = spec.width / p.side;
  p.row_y = p.side * uniform_int(rng, 0, spec.height / p.side - 1);
  p.start_slot = uniform_int(rng, 0, p.slots - 1);
  return p;
}

}  // namespace detail

/// Deterministic synthetic clip. moving_square jumps one square-width to the
/// right per frame (wrapping) over a static textured background.
inline Video gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  require(spec.width >= 8 && spec.height >= 8, ErrorKind::parameter,
          "synthetic video needs width, height >= 8");
  require(spec.frame_count >= 1, ErrorKind::parameter, "synthetic video needs frame_count >= 1");
  require(spec.channels == 1 || spec.channels == 3, ErrorKind::parameter,
          "synthetic video channels must be 1 or 3");

  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(spec.motif)));
  Video video;
  video.id = std::string(to_string(spec.motif)) + "_" + std::to_string(seed);
  video.fps = 25.0;
  const int W = spec.width, H = spec.height, C = spec.channels;

  switch (spec.motif) {
    case Motif::constant: {
      Frame f(W, H, C);
      std::vector<int> base(static_cast<std::size_t>(C));
      for (auto& b : base) b = uniform_int(rng, 40, 200);
      const int gx = uniform_int(rng, 1, 3), gy = uniform_int(rng, 1, 3);
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
          for (int c = 0; c < C; ++c)
            f.at(x, y, c) = static_cast<std::uint8_t>(base[c] + (gx * x + gy * y) % 32);
      video.frames.assign(static_cast<std::size_t>(spec.frame_count), f);
      break;
    }
    case Motif::moving_square: {
      const auto plan = detail::plan_square(spec, rng);
      Frame background(W, H, C);
      for (auto& px : background.pixels) px = static_cast<std::uint8_t>(16 + uniform_byte(rng) % 80);
      std::vector<std::uint8_t> color(static_cast<std::size_t>(C));
      for (auto& v : color) v = static_cast<std::uint8_t>(200 + uniform_byte(rng) % 56);
      for (int t = 0; t < spec.frame_count; ++t) {
        Frame f = background;
        const int x0 = ((plan.start_slot + t) % plan.slots) * plan.side;
        for (int y = plan.row_y; y < plan.row_y + plan.side; ++y)
          for (int x = x0; x < x0 + plan.side; ++x)
            for (int c = 0; c < C; ++c) f.at(x, y, c) = color[c];
        video.frames.push_back(std::move(f));
      }
      break;
    }
    case Motif::noise: {
      for (int t = 0; t < spec.frame_count; ++t) {
        Frame f(W, H, C);
        for (auto& px : f.pixels) px = uniform_byte(rng);
        video.frames.push_back(std::move(f));
      }
      break;
    }
    case Motif::gradient_drift: {
      std::vector<int> phase(static_cast<std::size_t>(C));
      for (auto& p : phase) p = uniform_int(rng, 0, 255);
      const int gx = uniform_int(rng, 1, 4), gy = uniform_int(rng, 1, 4);
      const int drift = uniform_int(rng, 2, 6);
      for (int t = 0; t < spec.frame_count; ++t) {
        Frame f(W, H, C);
        for (int y = 0; y < H; ++y)
          for (int x = 0; x < W; ++x)
            for (int c = 0; c < C; ++c)
              f.at(x, y, c) = static_cast<std::uint8_t>((phase[c] + gx * x + gy * y + drift * t * (c + 1)) & 0xFF);
        video.frames.push_back(std::move(f));
      }
      break;
    }
  }
  return video;
}

/// Where the moving_square motif draws its square in frame t.
inline Rect square_position(const SyntheticSpec& spec, std::uint64_t seed, int t) {
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(Motif::moving_square)));
  const auto plan = detail::plan_square(spec, rng);
  return {((plan.start_slot + t) % plan.slots) * plan.side, plan.row_y, plan.side, plan.side};
}

// ---------------------------------------------------------------------------
// PPM / PGM

inline std::vector<std::uint8_t> encode_pnm(const Frame& frame) {
  const std::string header = std::string(frame.channels == 3 ? "P6" : "P5") + "\n" +
                             std::to_string(frame.width) + " " + std::to_string(frame.height) +
                             "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), frame.pixels.begin(), frame.pixels.end());
  return out;
}

inline Frame decode_pnm(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> int {
    skip_space();
    long value = 0;
    std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(bytes[pos]) && pos - start < 7) {
      value = value * 10 + (bytes[pos] - '0');
      ++pos;
    }
    require(pos > start, ErrorKind::format, "malformed PNM header");
    return static_cast<int>(value);
  };

  require(bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6'),
          ErrorKind::format, "not a binary PGM/PPM image");
  const int channels = bytes[1] == '6' ? 3 : 1;
  pos = 2;
  const int w = read_int(), h = read_int(), maxval = read_int();
  require(maxval == 255, ErrorKind::format, "only maxval 255 is supported");
  require(pos < bytes.size() && std::isspace(bytes[pos]), ErrorKind::format, "malformed PNM header");
  ++pos;
  require(w > 0 && h > 0, ErrorKind::format, "PNM dimensions must be positive");
  const std::size_t n = static_cast<std::size_t>(w) * h * channels;
  require(bytes.size() - pos == n, ErrorKind::format, "PNM raster length does not match header");
  return Frame(w, h, channels, std::vector<std::uint8_t>(bytes.begin() + static_cast<long>(pos), bytes.end()));
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::io, "cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Writes to a sibling temp file and renames over the target.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::io, "cannot write '" + tmp.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    require(static_cast<bool>(out), ErrorKind::io, "short write to '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

// ---------------------------------------------------------------------------
// Video directories: manifest.json + one PPM/PGM per frame

inline std::filesystem::path save_video(const Video& video, const std::filesystem::path& dir) {
  video.validate();
  std::filesystem::create_directories(dir);
  const char* ext = video.channels() == 3 ? ".ppm" : ".pgm";
  nlohmann::json names = nlohmann::json::array();
  for (std::size_t t = 0; t < video.frames.size(); ++t) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%04zu%s", t, ext);
    write_file_atomic(dir / name, encode_pnm(video.frames[t]));
    names.push_back(name);
  }
  nlohmann::json manifest = {{"id", video.id},
                             {"fps", video.fps},
                             {"width", video.width()},
                             {"height", video.height()},
                             {"channels", video.channels()},
                             {"frames", names}};
  const auto path = dir / "manifest.json";
  write_file_atomic(path, manifest.dump(2) + "\n");
  return path;
}

inline Video load_video(const std::filesystem::path& manifest_path) {
  nlohmann::json m;
  try {
    const auto bytes = read_file_bytes(manifest_path);
    m = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, "malformed manifest '" + manifest_path.string() + "': " + e.what());
  }

  Video video;
  int width = 0, height = 0, channels = 0;
  std::vector<std::string> names;
  try {
    video.id = m.at("id").get<std::string>();
    video.fps = m.at("fps").get<double>();
    width = m.at("width").get<int>();
    height = m.at("height").get<int>();
    channels = m.at("channels").get<int>();
    names = m.at("frames").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, "malformed manifest '" + manifest_path.string() + "': " + e.what());
  }
  require(!names.empty(), ErrorKind::parameter, "T >= 1 violated: manifest lists no frames");

  const auto dir = manifest_path.parent_path();
  for (const auto& name : names) {
    const auto path = dir / name;
    require(std::filesystem::exists(path), ErrorKind::io, "missing frame file '" + path.string() + "'");
    Frame f = decode_pnm(read_file_bytes(path));
    require(f.width == width && f.height == height && f.channels == channels, ErrorKind::dimension,
            "frame '" + name + "' does not match manifest dimensions");
    video.frames.push_back(std::move(f));
  }
  return video;
}

/// Accepts either a video directory or its manifest path.
inline Video load_video_dir(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) return load_video(path / "manifest.json");
  return load_video(path);
}

/// All video subdirectories (those holding a manifest.json), sorted by name.
inline std::vector<Video> load_dataset(const std::filesystem::path& dir) {
  require(std::filesystem::is_directory(dir), ErrorKind::io, "dataset '" + dir.string() + "' not found");
  std::vector<std::filesystem::path> dirs;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_directory() && std::filesystem::exists(entry.path() / "manifest.json")) {
      dirs.push_back(entry.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  std::vector<Video> videos;
  for (const auto& d : dirs) videos.push_back(load_video(d / "manifest.json"));
  return videos;
}

// ---------------------------------------------------------------------------
// Block grids

struct Block {
  int index = 0;
  Rect rect;
};

struct BlockGrid {
  int width = 0;
  int height = 0;
  int rows = 0;
  int cols = 0;
  std::vector<Block> blocks;

  int block_count() const { return rows * cols; }
};

/// Uniform grid; the last row and column absorb the remainder pixels.
inline BlockGrid partition_blocks(int width, int height, int rows, int cols) {
  require(rows > 0 && cols > 0, ErrorKind::parameter, "block grid needs rows, cols >= 1");
  require(width > 0 && height > 0, ErrorKind::parameter, "block grid needs a positive frame size");
  require(rows <= height && cols <= width, ErrorKind::parameter,
          "block grid " + std::to_string(rows) + "x" + std::to_string(cols) + " does not fit a " +
              std::to_string(width) + "x" + std::to_string(height) + " frame");
  BlockGrid grid{width, height, rows, cols, {}};
  const int bw = width / cols, bh = height / rows;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      Rect rect{c * bw, r * bh, c == cols - 1 ? width - c * bw : bw, r == rows - 1 ? height - r * bh : bh};
      grid.blocks.push_back({r * cols + c, rect});
    }
  }
  return grid;
}

}  // namespace dia
