#ifndef MRD_PARALLEL_HPP
#define MRD_PARALLEL_HPP

#include <algorithm>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mrd {

// Runs body(begin, end) over contiguous slices of [0, n) on `workers`
// threads. The first exception thrown by any slice is rethrown.
template <class Body>
void parallel_for(std::int64_t n, int workers, Body&& body) {
  workers = std::max(1, workers);
  if (workers == 1 || n < 2) {
    body(std::int64_t{0}, n);
    return;
  }
  const std::int64_t slices = std::min<std::int64_t>(workers, n);
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> threads;
  threads.reserve(static_cast<std::size_t>(slices));
  for (std::int64_t w = 0; w < slices; ++w) {
    const std::int64_t begin = n * w / slices;
    const std::int64_t end = n * (w + 1) / slices;
    threads.emplace_back([&, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  threads.clear();
  if (error) std::rethrow_exception(error);
}

}  // namespace mrd

#endif  // MRD_PARALLEL_HPP
