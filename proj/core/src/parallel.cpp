#include "deepi2i/parallel.h"

#include <condition_variable>
#include <mutex>
#include <thread>
#include <vector>

namespace deepi2i {

namespace {

thread_local bool t_inside_pool = false;

// Persistent pool: the caller runs chunk 0 while workers run the rest.
// Sized for small core counts; BLAS is pinned to one thread (see blas.cpp)
// and this pool provides the batch-level parallelism instead.
class Pool {
 public:
  static Pool& instance() {
    static Pool pool;
    return pool;
  }

  int workers() const { return static_cast<int>(threads_.size()) + 1; }

  void run(const std::function<void(int)>& fn, int chunks) {
    if (chunks <= 1) {
      fn(0);
      return;
    }
    {
      std::unique_lock<std::mutex> lock(m_);
      fn_ = &fn;
      chunks_ = chunks;
      next_ = 1;
      pending_ = chunks - 1;
      ++generation_;
    }
    cv_.notify_all();
    fn(0);
    std::unique_lock<std::mutex> lock(m_);
    done_cv_.wait(lock, [&] { return pending_ == 0; });
    fn_ = nullptr;
  }

 private:
  Pool() {
    const unsigned hw = std::thread::hardware_concurrency();
    const int extra = hw > 1 ? static_cast<int>(hw) - 1 : 0;
    for (int i = 0; i < extra; ++i)
      threads_.emplace_back([this] { worker_loop(); });
  }

  ~Pool() {
    {
      std::unique_lock<std::mutex> lock(m_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  void worker_loop() {
    uint64_t seen = 0;
    while (true) {
      std::unique_lock<std::mutex> lock(m_);
      cv_.wait(lock, [&] { return stop_ || generation_ != seen; });
      if (stop_) return;
      seen = generation_;
      while (next_ < chunks_) {
        const int chunk = next_++;
        const auto* fn = fn_;
        lock.unlock();
        (*fn)(chunk);
        lock.lock();
        if (--pending_ == 0) done_cv_.notify_all();
      }
    }
  }

  std::vector<std::thread> threads_;
  std::mutex m_;
  std::condition_variable cv_, done_cv_;
  const std::function<void(int)>* fn_ = nullptr;
  int chunks_ = 0, next_ = 0, pending_ = 0;
  uint64_t generation_ = 0;
  bool stop_ = false;
};

}  // namespace

int worker_count() { return Pool::instance().workers(); }

int chunk_count(int64_t n) {
  return static_cast<int>(std::min<int64_t>(Pool::instance().workers(), std::max<int64_t>(n, 1)));
}

void parallel_for(int64_t n, const std::function<void(int, int64_t, int64_t)>& fn) {
  if (n <= 0) return;
  const int chunks = chunk_count(n);
  if (chunks <= 1 || t_inside_pool) {  // no nested parallelism
    fn(0, 0, n);
    return;
  }
  const int64_t per = (n + chunks - 1) / chunks;
  Pool::instance().run(
      [&](int c) {
        t_inside_pool = true;
        const int64_t begin = c * per;
        const int64_t end = std::min<int64_t>(begin + per, n);
        if (begin < end) fn(c, begin, end);
        t_inside_pool = false;
      },
      chunks);
}

}  // namespace deepi2i
