#pragma once

#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <mutex>
#include <thread>

namespace oocqr {

/// Single background thread that runs I/O jobs strictly in submission order.
/// FIFO order is what makes a read queued after a write-back of the same tile
/// observe the written data.
class IoAgent {
 public:
  IoAgent();
  IoAgent(const IoAgent&) = delete;
  IoAgent& operator=(const IoAgent&) = delete;
  ~IoAgent();

  std::shared_future<void> submit(std::function<void()> job);

 private:
  void run();

  std::mutex mutex_;
  std::condition_variable ready_;
  std::deque<std::packaged_task<void()>> queue_;
  bool stopping_ = false;
  std::thread worker_;
};

}  // namespace oocqr
