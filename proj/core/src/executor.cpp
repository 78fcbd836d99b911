#include "medflow/executor.hpp"

#include <atomic>
#include <thread>

namespace medflow {

void InlineExecutor::run_wave(std::vector<std::function<void()>> tasks) {
  for (auto& task : tasks) task();
}

PoolExecutor::PoolExecutor(std::size_t size) : size_(size) {
  if (size_ == 0) throw ExecutorConfigError("pool size must be >= 1");
}

std::string PoolExecutor::name() const { return "pool=" + std::to_string(size_); }

void PoolExecutor::run_wave(std::vector<std::function<void()>> tasks) {
  if (tasks.empty()) return;
  if (tasks.size() == 1) {
    tasks[0]();
    return;
  }
  std::atomic<std::size_t> cursor{0};
  auto worker = [&] {
    for (;;) {
      std::size_t i = cursor.fetch_add(1);
      if (i >= tasks.size()) return;
      tasks[i]();
    }
  };
  std::size_t workers = std::min(size_, tasks.size());
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t i = 0; i < workers; ++i) threads.emplace_back(worker);
  for (std::thread& t : threads) t.join();
}

void RemoteExecutor::run_wave(std::vector<std::function<void()>>) {
  throw NotImplementedError("remote execution is a stub; use inline or pool=K");
}

std::unique_ptr<Executor> make_executor(const std::string& spec) {
  if (spec == "inline") return std::make_unique<InlineExecutor>();
  if (spec.rfind("pool=", 0) == 0) {
    const std::string num = spec.substr(5);
    if (num.empty() || num.find_first_not_of("0123456789") != std::string::npos)
      throw ExecutorConfigError("bad pool size in '" + spec + "'");
    return std::make_unique<PoolExecutor>(std::stoul(num));
  }
  throw ExecutorConfigError("unknown executor '" + spec + "' (want inline or pool=K)");
}

}  // namespace medflow
