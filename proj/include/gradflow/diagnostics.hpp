#pragma once

#include <cstddef>
#include <functional>
#include <string>

namespace gradflow::diag {

using Sink = std::function<void(const std::string&)>;

/// Reports a non-fatal condition. The default sink writes to stderr.
void warn(const std::string& message);

/// Replaces the warning sink, returning the previous one. Passing an empty
/// function restores the default.
Sink set_sink(Sink sink);

/// Number of warnings emitted by this process so far.
std::size_t warning_count();

}  // namespace gradflow::diag
