#pragma once

#include <cstddef>
#include <functional>

namespace translate {

unsigned default_threads();

// Runs body(i) for i in [0, n) on up to `threads` workers. Callers write
// results into slot i so output order never depends on scheduling. If any
// call throws, the exception from the lowest failing index is rethrown.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace translate
