#pragma once

#include <cstddef>
#include <functional>

#include "spikeforge/precision.hpp"

namespace spikeforge::inline SPIKEFORGE_ABI {

/// Worker cap for parallel_for. Zero restores the default, which reads
/// SPIKEFORGE_THREADS and falls back to the hardware concurrency.
void set_thread_count(std::size_t n);
std::size_t thread_count();

/// Runs fn(i) for i in [0, n). Callers must only write disjoint outputs;
/// results never depend on the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace spikeforge::inline SPIKEFORGE_ABI
