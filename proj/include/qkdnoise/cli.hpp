// Command-line front end.
#pragma once

#include <iosfwd>

namespace qkdnoise::cli {

// Exit status: 0 success, 1 numerical failure, 2 configuration error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qkdnoise::cli
