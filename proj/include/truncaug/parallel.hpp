#pragma once

#include <cstddef>
#include <functional>

namespace truncaug {

// Worker count from TRUNCAUG_THREADS, else hardware concurrency (min 1).
std::size_t worker_count();

// Runs body(i) for i in [0, count) on a bounded pool. Work items must write
// to disjoint outputs; the first exception thrown is rethrown.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace truncaug
