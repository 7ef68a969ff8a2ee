#pragma once

// Caller-supplied worker lanes for intra-operation parallelism. Work items
// are independent; results must not depend on which lane runs which item, so
// any executor yields the same output.

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace cubit {

class Executor {
 public:
  virtual ~Executor() = default;
  /// Run fn(i) for every i in [0, n); all items complete before returning.
  virtual void parallel_for(size_t n, const std::function<void(size_t)>& fn) = 0;
};

class SerialExecutor final : public Executor {
 public:
  void parallel_for(size_t n, const std::function<void(size_t)>& fn) override {
    for (size_t i = 0; i < n; ++i) fn(i);
  }
  static SerialExecutor& instance() {
    static SerialExecutor ex;
    return ex;
  }
};

/// Long-lived helper lanes. parallel_for splits [0, n) into lanes+1 chunks;
/// the caller runs one chunk itself and waits for the rest.
class PoolExecutor final : public Executor {
 public:
  explicit PoolExecutor(unsigned lanes) {
    for (unsigned i = 0; i < lanes; ++i) {
      threads_.emplace_back([this](std::stop_token st) { worker(st); });
    }
  }

  ~PoolExecutor() override {
    {
      std::lock_guard<std::mutex> g(mu_);
      stopping_ = true;
    }
    cv_.notify_all();
  }

  unsigned lanes() const { return static_cast<unsigned>(threads_.size()); }

  void parallel_for(size_t n, const std::function<void(size_t)>& fn) override {
    size_t parts = threads_.size() + 1;
    if (n == 0) return;
    if (parts == 1 || n < 2 * parts) {
      for (size_t i = 0; i < n; ++i) fn(i);
      return;
    }
    struct Job {
      const std::function<void(size_t)>* fn;
      size_t begin, end;
    };
    std::atomic<size_t> pending{0};
    std::vector<Job> jobs;
    size_t chunk = (n + parts - 1) / parts;
    for (size_t b = chunk; b < n; b += chunk) {
      jobs.push_back(Job{&fn, b, b + chunk < n ? b + chunk : n});
    }
    pending.store(jobs.size(), std::memory_order_relaxed);
    {
      std::lock_guard<std::mutex> g(mu_);
      for (auto& j : jobs) {
        queue_.emplace_back([&fn, &pending, this, j] {
          for (size_t i = j.begin; i < j.end; ++i) (*j.fn)(i);
          if (pending.fetch_sub(1, std::memory_order_acq_rel) == 1) done_cv_.notify_all();
        });
      }
    }
    cv_.notify_all();
    for (size_t i = 0; i < chunk && i < n; ++i) fn(i);
    std::unique_lock<std::mutex> g(mu_);
    done_cv_.wait(g, [&] { return pending.load(std::memory_order_acquire) == 0; });
  }

 private:
  void worker(std::stop_token st) {
    for (;;) {
      std::function<void()> task;
      {
        std::unique_lock<std::mutex> g(mu_);
        cv_.wait(g, [&] { return stopping_ || !queue_.empty() || st.stop_requested(); });
        if (queue_.empty()) {
          if (stopping_ || st.stop_requested()) return;
          continue;
        }
        task = std::move(queue_.front());
        queue_.pop_front();
      }
      task();
    }
  }

  std::mutex mu_;
  std::condition_variable cv_, done_cv_;
  std::deque<std::function<void()>> queue_;
  bool stopping_ = false;
  std::vector<std::jthread> threads_;
};

}  // namespace cubit
