#pragma once

#include <cstddef>
#include <functional>

namespace wqed {

// Runs body(i) for i in [0, n) on up to `jobs` threads. Work is handed out
// through an atomic counter; results must be written to slot i by the body
// so the output order never depends on scheduling. The exception raised at
// the lowest index is rethrown after all workers finish.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& body);

} // namespace wqed
