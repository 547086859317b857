#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace resmpc {

// Persistent worker pool for data-parallel loops. Work is split into one
// contiguous chunk per participant (workers plus the calling thread), so the
// result of a loop body that writes disjoint outputs is independent of the
// pool size.
class ThreadPool {
 public:
  explicit ThreadPool(int workers) {
    workers = std::max(0, workers);
    for (int i = 0; i < workers; ++i) {
      threads_.emplace_back([this, i] { WorkerLoop(i + 1); });
    }
  }

  ~ThreadPool() {
    {
      std::lock_guard<std::mutex> lk(mutex_);
      stop_ = true;
    }
    wake_.notify_all();
    for (auto& t : threads_) t.join();
  }

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  int participants() const { return static_cast<int>(threads_.size()) + 1; }

  // Runs body(begin, end) over a partition of [0, n). Blocks until all
  // chunks are done. Reentrant calls from inside a body are not supported.
  void ParallelFor(std::int64_t n,
                   const std::function<void(std::int64_t, std::int64_t)>& body) {
    if (n <= 0) return;
    const int parts = participants();
    if (parts == 1 || n == 1) {
      body(0, n);
      return;
    }
    {
      std::lock_guard<std::mutex> lk(mutex_);
      job_ = &body;
      job_n_ = n;
      job_parts_ = parts;
      pending_ = static_cast<int>(threads_.size());
      ++generation_;
    }
    wake_.notify_all();
    RunChunk(0, body);
    std::unique_lock<std::mutex> lk(mutex_);
    done_.wait(lk, [this] { return pending_ == 0; });
    job_ = nullptr;
  }

  // Pool shared by the batched evaluation backend. Sized from the hardware
  // thread count; RESMPC_THREADS overrides it.
  static ThreadPool& Global();

 private:
  void RunChunk(int part, const std::function<void(std::int64_t, std::int64_t)>& body) {
    const std::int64_t chunk = (job_n_ + job_parts_ - 1) / job_parts_;
    const std::int64_t begin = part * chunk;
    const std::int64_t end = std::min<std::int64_t>(job_n_, begin + chunk);
    if (begin < end) body(begin, end);
  }

  void WorkerLoop(int part) {
    std::uint64_t seen = 0;
    for (;;) {
      const std::function<void(std::int64_t, std::int64_t)>* job = nullptr;
      {
        std::unique_lock<std::mutex> lk(mutex_);
        wake_.wait(lk, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
        job = job_;
      }
      if (job != nullptr) RunChunk(part, *job);
      {
        std::lock_guard<std::mutex> lk(mutex_);
        if (--pending_ == 0) done_.notify_one();
      }
    }
  }

  std::vector<std::thread> threads_;
  std::mutex mutex_;
  std::condition_variable wake_, done_;
  const std::function<void(std::int64_t, std::int64_t)>* job_ = nullptr;
  std::int64_t job_n_ = 0;
  int job_parts_ = 1;
  int pending_ = 0;
  std::uint64_t generation_ = 0;
  bool stop_ = false;
};

}  // namespace resmpc
