#pragma once

#include <string_view>

namespace nodfuse {

/// Progress and warnings go to stderr; set_quiet(true) silences both for the
/// current process.
void info(std::string_view message);
void warn(std::string_view message);
void set_quiet(bool quiet);

} // namespace nodfuse
