#include <algorithm>
#include <bit>
#include <cstring>
#include <sstream>
#include <utility>

#include <zlib.h>

#include "layerfuse/ingest.hpp"

namespace layerfuse {

const FramePrediction& WindowPrediction::frame(int timestamp) const {
  const int idx = timestamp - window.start;
  if (idx < 0 || idx >= static_cast<int>(frames.size()) || frames[idx].timestamp != timestamp) {
    throw std::out_of_range("window " + std::to_string(window.index) + " has no frame " +
                            std::to_string(timestamp));
  }
  return frames[idx];
}

FramePrediction& WindowPrediction::frame(int timestamp) {
  return const_cast<FramePrediction&>(std::as_const(*this).frame(timestamp));
}

void WindowPrediction::validate() const {
  if (height < 1 || width < 1) throw std::invalid_argument("prediction has empty dimensions");
  if (static_cast<int>(frames.size()) != window.length) {
    throw std::invalid_argument("prediction frame count does not match window length");
  }
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    if (f.timestamp != window.start + static_cast<int>(i)) {
      throw std::invalid_argument("prediction timestamps are not contiguous");
    }
    if (f.points.height() != height || f.points.width() != width ||
        f.confidence.height() != height || f.confidence.width() != width) {
      throw std::invalid_argument("frame " + std::to_string(f.timestamp) +
                                  " dimensions differ from the window");
    }
  }
}

const char* to_string(ContainerError::Kind kind) {
  switch (kind) {
    case ContainerError::Kind::Io: return "io";
    case ContainerError::Kind::BadHeader: return "bad-header";
    case ContainerError::Kind::DimensionMismatch: return "dimension-mismatch";
    case ContainerError::Kind::WindowMismatch: return "window-mismatch";
    case ContainerError::Kind::Truncated: return "truncated";
    case ContainerError::Kind::Checksum: return "checksum";
  }
  return "unknown";
}

std::size_t container_frame_bytes(int height, int width) {
  const std::size_t n = static_cast<std::size_t>(height) * width;
  return 12 * sizeof(double) + n * (3 * sizeof(float) + sizeof(float) + 1);
}

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
void append_le(std::vector<std::uint8_t>& buf, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::uint8_t bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  buf.insert(buf.end(), bytes, bytes + sizeof(T));
}

template <typename T>
T read_le(const std::uint8_t* p) {
  std::uint8_t bytes[sizeof(T)];
  std::memcpy(bytes, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

std::vector<std::uint8_t> encode_header(const WindowSpec& w, int height, int width) {
  std::vector<std::uint8_t> buf;
  buf.insert(buf.end(), kContainerMagic, kContainerMagic + 4);
  append_le<std::uint32_t>(buf, kContainerVersion);
  append_le<std::uint32_t>(buf, static_cast<std::uint32_t>(w.index));
  append_le<std::uint32_t>(buf, static_cast<std::uint32_t>(w.start));
  append_le<std::uint32_t>(buf, static_cast<std::uint32_t>(w.length));
  append_le<std::uint32_t>(buf, static_cast<std::uint32_t>(height));
  append_le<std::uint32_t>(buf, static_cast<std::uint32_t>(width));
  return buf;
}

void encode_frame(std::vector<std::uint8_t>& buf, const FramePrediction& f) {
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) append_le<double>(buf, f.pose.rotation(r, c));
  for (int i = 0; i < 3; ++i) append_le<double>(buf, f.pose.translation[i]);
  for (float v : f.points.raw_points()) append_le<float>(buf, v);
  for (float v : f.confidence.raw()) append_le<float>(buf, v);
  for (std::uint8_t v : f.points.raw_validity()) buf.push_back(v ? 1 : 0);
}

ContainerHeader decode_header(const std::uint8_t* p, std::size_t available) {
  if (available < kContainerHeaderBytes) {
    throw ContainerError(ContainerError::Kind::BadHeader,
                         "container header truncated: " + std::to_string(available) +
                             " of " + std::to_string(kContainerHeaderBytes) + " bytes",
                         static_cast<long long>(available));
  }
  if (std::memcmp(p, kContainerMagic, 4) != 0) {
    throw ContainerError(ContainerError::Kind::BadHeader, "bad magic (expected \"LASR\")", 0);
  }
  ContainerHeader h;
  h.version = read_le<std::uint32_t>(p + 4);
  if (h.version != kContainerVersion) {
    throw ContainerError(ContainerError::Kind::BadHeader,
                         "unsupported container version " + std::to_string(h.version), 4);
  }
  const auto index = read_le<std::uint32_t>(p + 8);
  const auto start = read_le<std::uint32_t>(p + 12);
  const auto count = read_le<std::uint32_t>(p + 16);
  const auto height = read_le<std::uint32_t>(p + 20);
  const auto width = read_le<std::uint32_t>(p + 24);
  constexpr std::uint32_t kLimit = 1u << 20;
  if (index < 1 || start < 1 || count < 1 || index > (1u << 30) || start > (1u << 30) ||
      count > kLimit) {
    throw ContainerError(ContainerError::Kind::BadHeader,
                         "invalid window fields in header (index " + std::to_string(index) +
                             ", start " + std::to_string(start) + ", frames " +
                             std::to_string(count) + ")",
                         8);
  }
  if (height < 1 || width < 1 || height > kLimit || width > kLimit ||
      static_cast<std::uint64_t>(height) * width > (1ull << 28)) {
    throw ContainerError(ContainerError::Kind::DimensionMismatch,
                         "invalid frame dimensions " + std::to_string(height) + "x" +
                             std::to_string(width),
                         20);
  }
  h.window = WindowSpec{static_cast<int>(index), static_cast<int>(start), static_cast<int>(count)};
  h.height = static_cast<int>(height);
  h.width = static_cast<int>(width);
  return h;
}

// Checks size and checksum of a complete container image.
void check_layout(const ContainerHeader& h, std::size_t total, unsigned long crc_of_body,
                  const std::uint8_t* crc_bytes) {
  const std::size_t frame_bytes = container_frame_bytes(h.height, h.width);
  const std::size_t expected = kContainerHeaderBytes + frame_bytes * h.window.length + 4;
  if (total < expected) {
    const std::size_t payload = total > kContainerHeaderBytes ? total - kContainerHeaderBytes : 0;
    const int frame = static_cast<int>(std::min<std::size_t>(payload / frame_bytes,
                                                             h.window.length - 1));
    std::ostringstream msg;
    if (payload >= frame_bytes * h.window.length) {
      msg << "container truncated in checksum at offset " << total;
    } else {
      msg << "container truncated at offset " << total << " inside frame " << frame
          << " (expected " << expected << " bytes)";
    }
    throw ContainerError(ContainerError::Kind::Truncated, msg.str(),
                         static_cast<long long>(total), frame);
  }
  if (total > expected) {
    throw ContainerError(ContainerError::Kind::DimensionMismatch,
                         "container has " + std::to_string(total - expected) +
                             " trailing bytes beyond the declared " +
                             std::to_string(h.height) + "x" + std::to_string(h.width) + "x" +
                             std::to_string(h.window.length) + " payload",
                         static_cast<long long>(expected));
  }
  const auto stored = read_le<std::uint32_t>(crc_bytes);
  if (stored != static_cast<std::uint32_t>(crc_of_body)) {
    std::ostringstream msg;
    msg << "checksum mismatch: stored 0x" << std::hex << stored << ", computed 0x" << crc_of_body;
    throw ContainerError(ContainerError::Kind::Checksum, msg.str(),
                         static_cast<long long>(expected - 4));
  }
}

FramePrediction decode_frame(const std::uint8_t* p, const ContainerHeader& h, int frame_idx) {
  FramePrediction f;
  f.timestamp = h.window.start + frame_idx;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c, p += 8) f.pose.rotation(r, c) = read_le<double>(p);
  for (int i = 0; i < 3; ++i, p += 8) f.pose.translation[i] = read_le<double>(p);
  f.points = PointMap(h.height, h.width);
  f.confidence = ConfidenceMap(h.height, h.width);
  for (float& v : f.points.raw_points()) {
    v = read_le<float>(p);
    p += 4;
  }
  for (float& v : f.confidence.raw()) {
    v = read_le<float>(p);
    p += 4;
  }
  auto& valid = f.points.raw_validity();
  for (std::size_t i = 0; i < valid.size(); ++i) valid[i] = p[i] ? 1 : 0;
  return f;
}

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContainerError(ContainerError::Kind::Io, "cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::uint8_t> bytes(size);
  if (size && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size))) {
    throw ContainerError(ContainerError::Kind::Io, "read failed: " + path.string());
  }
  return bytes;
}

unsigned long crc_of(const std::uint8_t* p, std::size_t n) {
  unsigned long crc = crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, p, chunk);
    p += chunk;
    n -= chunk;
  }
  return crc;
}

}  // namespace

std::vector<std::uint8_t> encode_window_predictions(const WindowPrediction& pred) {
  pred.validate();
  std::vector<std::uint8_t> buf = encode_header(pred.window, pred.height, pred.width);
  buf.reserve(kContainerHeaderBytes +
              container_frame_bytes(pred.height, pred.width) * pred.frames.size() + 4);
  for (const auto& f : pred.frames) encode_frame(buf, f);
  append_le<std::uint32_t>(buf, static_cast<std::uint32_t>(crc_of(buf.data(), buf.size())));
  return buf;
}

WindowPrediction decode_window_predictions(const std::vector<std::uint8_t>& bytes) {
  const ContainerHeader h = decode_header(bytes.data(), bytes.size());
  const std::size_t frame_bytes = container_frame_bytes(h.height, h.width);
  const std::size_t body = kContainerHeaderBytes + frame_bytes * h.window.length;
  if (bytes.size() < body + 4) {
    check_layout(h, bytes.size(), 0, nullptr);  // throws Truncated
  }
  check_layout(h, bytes.size(), crc_of(bytes.data(), body), bytes.data() + body);

  WindowPrediction pred;
  pred.window = h.window;
  pred.height = h.height;
  pred.width = h.width;
  pred.frames.reserve(h.window.length);
  const std::uint8_t* p = bytes.data() + kContainerHeaderBytes;
  for (int i = 0; i < h.window.length; ++i, p += frame_bytes) {
    pred.frames.push_back(decode_frame(p, h, i));
  }
  return pred;
}

void write_window_predictions(const WindowPrediction& pred, const std::filesystem::path& path) {
  const auto bytes = encode_window_predictions(pred);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ContainerError(ContainerError::Kind::Io, "cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ContainerError(ContainerError::Kind::Io, "write failed: " + path.string());
}

WindowPrediction read_container(const std::filesystem::path& path) {
  return decode_window_predictions(slurp(path));
}

WindowPrediction read_window_predictions(const std::filesystem::path& path,
                                         const WindowSpec& expected) {
  WindowPrediction pred = read_container(path);
  if (!(pred.window == expected)) {
    std::ostringstream msg;
    msg << path.string() << " declares window " << pred.window.index << " [" << pred.window.start
        << ".." << pred.window.end() << "], expected window " << expected.index << " ["
        << expected.start << ".." << expected.end() << "]";
    throw ContainerError(ContainerError::Kind::WindowMismatch, msg.str(), 8);
  }
  return pred;
}

ContainerHeader inspect_container(const std::filesystem::path& path) {
  ContainerReader reader(path);
  return reader.header();
}

ContainerWriter::ContainerWriter(const std::filesystem::path& path, const WindowSpec& window,
                                 int height, int width)
    : out_(path, std::ios::binary | std::ios::trunc),
      path_(path),
      window_(window),
      height_(height),
      width_(width),
      crc_(crc32(0L, Z_NULL, 0)) {
  if (!out_) throw ContainerError(ContainerError::Kind::Io, "cannot create " + path.string());
  const auto header = encode_header(window, height, width);
  put(header.data(), header.size());
}

ContainerWriter::~ContainerWriter() = default;

void ContainerWriter::put(const void* data, std::size_t n) {
  crc_ = crc32(crc_, static_cast<const Bytef*>(data), static_cast<uInt>(n));
  out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out_) throw ContainerError(ContainerError::Kind::Io, "write failed: " + path_.string());
}

void ContainerWriter::write_frame(const FramePrediction& frame) {
  if (finished_ || written_ >= window_.length) {
    throw std::logic_error("ContainerWriter: more frames than declared");
  }
  if (frame.points.height() != height_ || frame.points.width() != width_) {
    throw std::invalid_argument("ContainerWriter: frame dimensions differ from header");
  }
  std::vector<std::uint8_t> buf;
  buf.reserve(container_frame_bytes(height_, width_));
  encode_frame(buf, frame);
  put(buf.data(), buf.size());
  ++written_;
}

void ContainerWriter::finish() {
  if (finished_) return;
  if (written_ != window_.length) {
    throw std::logic_error("ContainerWriter: " + std::to_string(written_) + " of " +
                           std::to_string(window_.length) + " frames written");
  }
  std::vector<std::uint8_t> tail;
  append_le<std::uint32_t>(tail, static_cast<std::uint32_t>(crc_));
  out_.write(reinterpret_cast<const char*>(tail.data()), 4);
  out_.flush();
  if (!out_) throw ContainerError(ContainerError::Kind::Io, "write failed: " + path_.string());
  finished_ = true;
}

ContainerReader::ContainerReader(const std::filesystem::path& path)
    : in_(path, std::ios::binary), path_(path) {
  if (!in_) throw ContainerError(ContainerError::Kind::Io, "cannot open " + path.string());
  in_.seekg(0, std::ios::end);
  const auto total = static_cast<std::size_t>(in_.tellg());
  in_.seekg(0);
  std::uint8_t hdr[kContainerHeaderBytes];
  const std::size_t got = std::min(total, kContainerHeaderBytes);
  in_.read(reinterpret_cast<char*>(hdr), static_cast<std::streamsize>(got));
  header_ = decode_header(hdr, got);

  const std::size_t frame_bytes = container_frame_bytes(header_.height, header_.width);
  const std::size_t body = kContainerHeaderBytes + frame_bytes * header_.window.length;
  if (total < body + 4) check_layout(header_, total, 0, nullptr);  // throws Truncated

  // Stream the body once for the checksum.
  in_.seekg(0);
  unsigned long crc = crc32(0L, Z_NULL, 0);
  std::vector<char> chunk(1 << 20);
  std::size_t remaining = body;
  while (remaining > 0) {
    const std::size_t n = std::min(remaining, chunk.size());
    in_.read(chunk.data(), static_cast<std::streamsize>(n));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(chunk.data()), static_cast<uInt>(n));
    remaining -= n;
  }
  std::uint8_t crc_bytes[4];
  in_.read(reinterpret_cast<char*>(crc_bytes), 4);
  check_layout(header_, total, crc, crc_bytes);
  in_.seekg(static_cast<std::streamoff>(kContainerHeaderBytes));
}

FramePrediction ContainerReader::next() {
  if (!has_next()) throw std::logic_error("ContainerReader: no more frames");
  std::vector<std::uint8_t> buf(container_frame_bytes(header_.height, header_.width));
  in_.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!in_) throw ContainerError(ContainerError::Kind::Io, "read failed: " + path_.string());
  return decode_frame(buf.data(), header_, next_++);
}

}  // namespace layerfuse
