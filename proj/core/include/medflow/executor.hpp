#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "medflow/errors.hpp"

namespace medflow {

MEDFLOW_DEFINE_ERROR(ExecutorConfigError, "ExecutorConfig");
MEDFLOW_DEFINE_ERROR(NotImplementedError, "NotImplemented");

// Runs one wave's tasks and returns when all of them finished. Tasks must
// not throw; node-level failures are captured inside the task itself.
class Executor {
 public:
  virtual ~Executor() = default;
  virtual void run_wave(std::vector<std::function<void()>> tasks) = 0;
  virtual std::string name() const = 0;
};

// Single execution context; tasks run in submission order.
class InlineExecutor final : public Executor {
 public:
  void run_wave(std::vector<std::function<void()>> tasks) override;
  std::string name() const override { return "inline"; }
};

// Bounded pool: at most `size` tasks in flight, pulled from a shared index.
class PoolExecutor final : public Executor {
 public:
  explicit PoolExecutor(std::size_t size);
  void run_wave(std::vector<std::function<void()>> tasks) override;
  std::string name() const override;
  std::size_t size() const { return size_; }

 private:
  std::size_t size_;
};

// Extension seam for distributing waves across machines; out of scope here,
// so every call reports NotImplemented.
class RemoteExecutor final : public Executor {
 public:
  explicit RemoteExecutor(std::string endpoint) : endpoint_(std::move(endpoint)) {}
  void run_wave(std::vector<std::function<void()>> tasks) override;
  std::string name() const override { return "remote(" + endpoint_ + ")"; }

 private:
  std::string endpoint_;
};

// Parses "inline" or "pool=K".
std::unique_ptr<Executor> make_executor(const std::string& spec);

}  // namespace medflow
