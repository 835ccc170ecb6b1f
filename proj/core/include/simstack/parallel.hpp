// SPDX-License-Identifier: Apache-2.0
//
// Minimal deterministic task pool. Tasks are indexed, independent, and write
// into preallocated slots, so the worker count changes wall-clock time only,
// never results.

#pragma once

#include <cstddef>
#include <functional>

namespace simstack {

int default_worker_count();

/// Runs fn(0..count-1) on `workers` threads (workers <= 1 runs inline).
/// The first exception thrown by any task is rethrown after all threads
/// join.
void parallel_for(std::size_t count, int workers,
                  const std::function<void(std::size_t)>& fn);

}  // namespace simstack
