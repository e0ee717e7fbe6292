#pragma once

#include <omp.h>

#include <cstddef>
#include <exception>
#include <mutex>

namespace lawsde::detail {

/// Static-schedule parallel loop over [0, n). The first exception thrown by
/// any iteration (lowest index wins) is rethrown on the calling thread.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  std::exception_ptr error;
  std::size_t error_index = n;
  std::mutex mu;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(n); ++k) {
    try {
      body(static_cast<std::size_t>(k));
    } catch (...) {
      std::lock_guard lock(mu);
      if (static_cast<std::size_t>(k) < error_index) {
        error_index = static_cast<std::size_t>(k);
        error = std::current_exception();
      }
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace lawsde::detail
