#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace ensemble_ols {

/// 0 means "all hardware threads"; never returns less than 1.
unsigned resolve_threads(unsigned requested) noexcept;

/// Runs body(i) for i in [0, count) on up to `threads` worker threads.
/// Work is assigned by index stride, so results written to slot i of a
/// caller-owned buffer are independent of scheduling. If any invocation
/// throws, the exception from the lowest index is rethrown after all
/// workers join.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body);

/// Pairwise (cascade) summation in index order; deterministic for a given
/// input sequence.
double pairwise_sum(std::span<const double> values) noexcept;

}  // namespace ensemble_ols
