// SPDX-License-Identifier: MIT
#pragma once

#include <cstddef>
#include <exception>

namespace ivsurf::detail {

/// Runs fn(k) for k in [0, n), across OpenMP threads when `parallel` is set.
/// The first exception raised by any iteration is rethrown after the loop.
template <class Fn>
void for_each_index(std::ptrdiff_t n, bool parallel, Fn&& fn) {
    std::exception_ptr first;
#pragma omp parallel for schedule(dynamic, 8) if (parallel)
    for (std::ptrdiff_t k = 0; k < n; ++k) {
        try {
            fn(k);
        } catch (...) {
#pragma omp critical(ivsurf_first_error)
            if (!first) first = std::current_exception();
        }
    }
    if (first) std::rethrow_exception(first);
}

}  // namespace ivsurf::detail
