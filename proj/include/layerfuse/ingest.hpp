#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "layerfuse/geometry.hpp"
#include "layerfuse/windowing.hpp"

namespace layerfuse {

/// One frame of a window prediction: point map, camera-to-frame pose and
/// confidence, all in the coordinate frame the owning prediction is expressed in.
struct FramePrediction {
  int timestamp = 0;
  RigidPose pose;
  PointMap points;
  ConfidenceMap confidence;

  bool operator==(const FramePrediction& o) const {
    return timestamp == o.timestamp && pose.rotation == o.pose.rotation &&
           pose.translation == o.pose.translation && points == o.points &&
           confidence == o.confidence;
  }
};

/// Per-window output of the reconstructor, in the window's local frame.
struct WindowPrediction {
  WindowSpec window;
  int height = 0;
  int width = 0;
  std::vector<FramePrediction> frames;

  /// Frame with the given timestamp; throws std::out_of_range if absent.
  const FramePrediction& frame(int timestamp) const;
  FramePrediction& frame(int timestamp);

  /// Checks frame count, timestamps and per-frame dimensions.
  void validate() const;

  bool operator==(const WindowPrediction& o) const {
    return window == o.window && height == o.height && width == o.width && frames == o.frames;
  }
};

// Window prediction container, little-endian:
//   "LASR" | version u32 | window index u32 | start frame u32 | frame count u32 | H u32 | W u32
//   per frame: rotation 9×f64 row-major | translation 3×f64 | points H·W·3×f32 |
//              confidence H·W×f32 | validity H·W×u8
//   CRC32 (zlib polynomial) of every preceding byte.
inline constexpr char kContainerMagic[4] = {'L', 'A', 'S', 'R'};
inline constexpr std::uint32_t kContainerVersion = 1;
inline constexpr std::size_t kContainerHeaderBytes = 28;

std::size_t container_frame_bytes(int height, int width);

class ContainerError : public std::runtime_error {
 public:
  enum class Kind { Io, BadHeader, DimensionMismatch, WindowMismatch, Truncated, Checksum };

  ContainerError(Kind kind, const std::string& what, long long offset = -1, int frame = -1)
      : std::runtime_error(what), kind_(kind), offset_(offset), frame_(frame) {}

  Kind kind() const { return kind_; }
  /// Byte offset where the problem was detected, or -1.
  long long offset() const { return offset_; }
  /// Zero-based frame index affected, or -1.
  int frame() const { return frame_; }

 private:
  Kind kind_;
  long long offset_;
  int frame_;
};

const char* to_string(ContainerError::Kind kind);

struct ContainerHeader {
  std::uint32_t version = 0;
  WindowSpec window;
  int height = 0;
  int width = 0;
};

void write_window_predictions(const WindowPrediction& pred, const std::filesystem::path& path);

/// Reads a container and checks that it declares `expected`.
WindowPrediction read_window_predictions(const std::filesystem::path& path,
                                         const WindowSpec& expected);

/// Reads a container without checking the declared window.
WindowPrediction read_container(const std::filesystem::path& path);

/// Parses and validates the header, size and checksum without decoding frames.
ContainerHeader inspect_container(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_window_predictions(const WindowPrediction& pred);
WindowPrediction decode_window_predictions(const std::vector<std::uint8_t>& bytes);

/// Writes a container frame by frame when the full prediction is never held in
/// memory (e.g. a whole-sequence export). The frame count must be known up front.
class ContainerWriter {
 public:
  ContainerWriter(const std::filesystem::path& path, const WindowSpec& window, int height,
                  int width);
  ~ContainerWriter();
  ContainerWriter(const ContainerWriter&) = delete;
  ContainerWriter& operator=(const ContainerWriter&) = delete;

  void write_frame(const FramePrediction& frame);
  /// Appends the checksum; throws if fewer frames than declared were written.
  void finish();

 private:
  void put(const void* data, std::size_t n);

  std::ofstream out_;
  std::filesystem::path path_;
  WindowSpec window_;
  int height_;
  int width_;
  int written_ = 0;
  unsigned long crc_;
  bool finished_ = false;
};

/// Reads a container frame by frame; the checksum is verified up front.
class ContainerReader {
 public:
  explicit ContainerReader(const std::filesystem::path& path);

  const ContainerHeader& header() const { return header_; }
  bool has_next() const { return next_ < header_.window.length; }
  FramePrediction next();

 private:
  std::ifstream in_;
  std::filesystem::path path_;
  ContainerHeader header_;
  int next_ = 0;
};

}  // namespace layerfuse
