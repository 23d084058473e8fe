#pragma once

#include <cstddef>
#include <functional>

namespace iaip::detail {

// Runs body(i) for i in [0, n) on up to `threads` workers (0 means 1). Each
// index runs exactly once. If any call throws, the exception from the lowest
// failing index is rethrown after all workers finish, so the outcome does not
// depend on scheduling.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& body);

}  // namespace iaip::detail
