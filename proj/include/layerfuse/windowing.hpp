#pragma once

#include <vector>

namespace layerfuse {

/// One temporal window over the frame stream. Frame indices are 1-based.
struct WindowSpec {
  int index = 1;
  int start = 1;
  int length = 0;

  int end() const { return start + length - 1; }  // inclusive
  bool contains(int t) const { return t >= start && t <= end(); }
  bool operator==(const WindowSpec&) const = default;
};

/// Overlapping windows of length `window_len` advancing by `window_len - overlap`.
/// The last window is shifted back so it ends exactly at `total_frames`; a stream
/// shorter than one window yields a single short window.
/// Throws std::invalid_argument on total_frames == 0, overlap < 1 or overlap >= window_len.
std::vector<WindowSpec> schedule_windows(int total_frames, int window_len, int overlap);

/// Incremental form of schedule_windows for consumers that pull one window at a time.
class WindowScheduler {
 public:
  WindowScheduler(int total_frames, int window_len, int overlap);

  bool done() const { return done_; }
  WindowSpec next();

 private:
  int total_;
  int len_;
  int overlap_;
  int next_start_ = 1;
  int next_index_ = 1;
  bool done_ = false;
};

/// Timestamps shared by two windows, ascending.
std::vector<int> overlap_frames(const WindowSpec& a, const WindowSpec& b);

}  // namespace layerfuse
