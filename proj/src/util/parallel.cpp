#include "mfchaos/util/parallel.hpp"

#include <algorithm>
#include <charconv>
#include <stdexcept>
#include <string>

namespace mfchaos {
namespace {

std::pair<std::size_t, std::size_t> chunk(std::size_t n, std::size_t parts, std::size_t slot) {
  const std::size_t base = n / parts;
  const std::size_t extra = n % parts;
  const std::size_t begin = slot * base + std::min(slot, extra);
  return {begin, begin + base + (slot < extra ? 1 : 0)};
}

}  // namespace

ThreadPool::ThreadPool(std::size_t threads) {
  if (threads == 0) throw std::invalid_argument("thread count must be positive");
  for (std::size_t s = 1; s < threads; ++s) {
    workers_.emplace_back([this, s] { worker_loop(s); });
  }
}

ThreadPool::~ThreadPool() {
  {
    std::lock_guard lock(mutex_);
    stop_ = true;
  }
  wake_.notify_all();
  for (auto& w : workers_) w.join();
}

void ThreadPool::parallel_for(std::size_t n,
                              const std::function<void(std::size_t, std::size_t)>& body) {
  if (n == 0) return;
  if (workers_.empty() || n == 1) {
    body(0, n);
    return;
  }
  {
    std::lock_guard lock(mutex_);
    body_ = &body;
    n_ = n;
    pending_ = workers_.size();
    error_ = nullptr;
    ++generation_;
  }
  wake_.notify_all();

  std::exception_ptr mine;
  const auto [b, e] = chunk(n, size(), 0);
  try {
    if (b < e) body(b, e);
  } catch (...) {
    mine = std::current_exception();
  }

  std::unique_lock lock(mutex_);
  done_.wait(lock, [this] { return pending_ == 0; });
  body_ = nullptr;
  if (mine) std::rethrow_exception(mine);
  if (error_) std::rethrow_exception(error_);
}

void ThreadPool::worker_loop(std::size_t slot) {
  std::size_t seen = 0;
  for (;;) {
    const std::function<void(std::size_t, std::size_t)>* body = nullptr;
    std::size_t n = 0;
    {
      std::unique_lock lock(mutex_);
      wake_.wait(lock, [&] { return stop_ || generation_ != seen; });
      if (stop_) return;
      seen = generation_;
      body = body_;
      n = n_;
    }
    std::exception_ptr err;
    const auto [b, e] = chunk(n, size(), slot);
    try {
      if (b < e) (*body)(b, e);
    } catch (...) {
      err = std::current_exception();
    }
    {
      std::lock_guard lock(mutex_);
      if (err && !error_) error_ = err;
      if (--pending_ == 0) done_.notify_all();
    }
  }
}

std::size_t parse_thread_count(std::string_view text) {
  if (text == "auto") return std::max<std::size_t>(1, std::thread::hardware_concurrency());
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || value == 0) {
    throw std::invalid_argument("--threads expects a positive integer or 'auto', got '" +
                                std::string(text) + "'");
  }
  return value;
}

}  // namespace mfchaos
