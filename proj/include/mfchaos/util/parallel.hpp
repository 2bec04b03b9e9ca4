#pragma once

#include <condition_variable>
#include <exception>
#include <cstddef>
#include <functional>
#include <mutex>
#include <string_view>
#include <thread>
#include <vector>

namespace mfchaos {

// Fixed-size pool for index-space parallel loops. Work is split into
// contiguous chunks; each index is processed exactly once, so any loop body
// that writes only to its own slot gives results independent of the thread
// count. A pool of size 1 runs everything on the calling thread.
class ThreadPool {
 public:
  explicit ThreadPool(std::size_t threads = 1);
  ~ThreadPool();
  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  std::size_t size() const { return workers_.size() + 1; }

  // Calls body(begin, end) over a partition of [0, n). Blocks until done.
  // The first exception thrown by any chunk is rethrown here.
  void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

 private:
  void worker_loop(std::size_t slot);

  std::vector<std::thread> workers_;
  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable done_;
  const std::function<void(std::size_t, std::size_t)>* body_ = nullptr;
  std::size_t n_ = 0;
  std::size_t generation_ = 0;
  std::size_t pending_ = 0;
  std::exception_ptr error_;
  bool stop_ = false;
};

// "auto" -> hardware concurrency, otherwise a positive integer.
std::size_t parse_thread_count(std::string_view text);

}  // namespace mfchaos
