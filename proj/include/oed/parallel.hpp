#pragma once

#include <cstddef>
#include <functional>

namespace oed {

/// Worker count: OED_THREADS if set, otherwise hardware concurrency.
unsigned worker_count();

/// Run body(i) for i in [0, count). Iterations must be independent; each
/// writes only its own outputs, so results do not depend on the lane count.
/// The first exception thrown by any iteration is rethrown on the caller.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace oed
