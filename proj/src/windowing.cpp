#include "layerfuse/windowing.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace layerfuse {

WindowScheduler::WindowScheduler(int total_frames, int window_len, int overlap)
    : total_(total_frames), len_(window_len), overlap_(overlap) {
  if (total_frames <= 0) throw std::invalid_argument("schedule: stream has no frames");
  if (window_len < 2) throw std::invalid_argument("schedule: window_len must be >= 2");
  if (overlap < 1) throw std::invalid_argument("schedule: overlap must be >= 1");
  if (overlap >= window_len) {
    throw std::invalid_argument("schedule: overlap " + std::to_string(overlap) +
                                " >= window_len " + std::to_string(window_len) +
                                " makes no progress");
  }
}

WindowSpec WindowScheduler::next() {
  if (done_) throw std::logic_error("WindowScheduler exhausted");
  WindowSpec w;
  w.index = next_index_++;
  if (total_ <= len_) {
    w.start = 1;
    w.length = total_;
    done_ = true;
    return w;
  }
  w.start = std::min(next_start_, total_ - len_ + 1);
  w.length = len_;
  if (w.end() >= total_) done_ = true;
  next_start_ = w.start + len_ - overlap_;
  return w;
}

std::vector<WindowSpec> schedule_windows(int total_frames, int window_len, int overlap) {
  WindowScheduler sched(total_frames, window_len, overlap);
  std::vector<WindowSpec> out;
  while (!sched.done()) out.push_back(sched.next());
  return out;
}

std::vector<int> overlap_frames(const WindowSpec& a, const WindowSpec& b) {
  std::vector<int> out;
  const int lo = std::max(a.start, b.start);
  const int hi = std::min(a.end(), b.end());
  for (int t = lo; t <= hi; ++t) out.push_back(t);
  return out;
}

}  // namespace layerfuse
