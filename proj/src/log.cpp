#include "nodfuse/log.hpp"

#include <atomic>
#include <cstdio>

#include <fmt/format.h>

namespace nodfuse {

namespace {
std::atomic<bool> g_quiet{false};
}

void info(std::string_view message)
{
    if (!g_quiet)
        fmt::print(stderr, "{}\n", message);
}

void warn(std::string_view message)
{
    if (!g_quiet)
        fmt::print(stderr, "warning: {}\n", message);
}

void set_quiet(bool quiet) { g_quiet = quiet; }

} // namespace nodfuse
