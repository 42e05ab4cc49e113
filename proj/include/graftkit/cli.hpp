#pragma once

namespace graftkit {

// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
// Failures print a single `error: <message>` line to stderr.
int run_cli(int argc, const char* const* argv);

}  // namespace graftkit
