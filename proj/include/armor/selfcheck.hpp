#pragma once

#include <iosfwd>

namespace armor {

/// Runs the full oracle battery (mask-sweep equivalence, finite-difference
/// gradient checks, exhaustive-search agreement, descent steps) and prints one
/// line per check plus a non-gating selection-heuristic report. Returns true
/// when every gating check passes.
bool run_selfcheck(std::ostream& os);

}  // namespace armor
