#pragma once

#include <cstddef>
#include <functional>

namespace cpm {

// Runs fn(lo, hi) over a fixed contiguous partition of [0, n) across up to
// `jobs` threads. The partition depends only on (n, jobs), never on
// timing, so callers can produce bit-stable results.
void parallel_chunks(std::size_t n, int jobs, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace cpm
