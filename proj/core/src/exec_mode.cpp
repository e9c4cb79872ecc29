#include "negcnn/exec_mode.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string_view>
#include <thread>
#include <vector>

namespace negcnn {

namespace {

ExecMode mode_from_env() {
  const char* value = std::getenv(kExecModeEnv);
  if (value != nullptr && std::string_view(value) == "fast") return ExecMode::kFast;
  return ExecMode::kReference;
}

std::atomic<ExecMode>& mode_slot() {
  static std::atomic<ExecMode> mode{mode_from_env()};
  return mode;
}

}  // namespace

ExecMode exec_mode() { return mode_slot().load(std::memory_order_relaxed); }

void set_exec_mode(ExecMode mode) { mode_slot().store(mode, std::memory_order_relaxed); }

const char* to_string(ExecMode mode) {
  return mode == ExecMode::kFast ? "fast" : "reference";
}

std::size_t worker_count() {
  if (exec_mode() == ExecMode::kReference) return 1;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

void parallel_chunks(std::size_t n,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body) {
  const std::size_t workers = std::min(worker_count(), std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    body(0, 0, n);
    return;
  }
  std::vector<std::jthread> threads;
  threads.reserve(workers - 1);
  const std::size_t step = (n + workers - 1) / workers;
  for (std::size_t k = 1; k < workers; ++k) {
    const std::size_t begin = std::min(n, k * step);
    const std::size_t end = std::min(n, begin + step);
    threads.emplace_back([&body, k, begin, end] { body(k, begin, end); });
  }
  body(0, 0, std::min(n, step));
}

}  // namespace negcnn
