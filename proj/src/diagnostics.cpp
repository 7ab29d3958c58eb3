#include "gradflow/diagnostics.hpp"

#include <atomic>
#include <iostream>
#include <mutex>
#include <utility>

namespace gradflow::diag {

namespace {

std::mutex sink_mutex;
Sink current_sink;
std::atomic<std::size_t> counter{0};

}  // namespace

void warn(const std::string& message) {
  ++counter;
  std::lock_guard lock(sink_mutex);
  if (current_sink) {
    current_sink(message);
  } else {
    std::cerr << "warning: " << message << '\n';
  }
}

Sink set_sink(Sink sink) {
  std::lock_guard lock(sink_mutex);
  return std::exchange(current_sink, std::move(sink));
}

std::size_t warning_count() { return counter.load(); }

}  // namespace gradflow::diag
