#pragma once

namespace cortexfit {

/// Entry point shared by the command-line tool and the tests.
/// Exit codes: 0 success, 1 usage error (usage text on stderr),
/// 2 data or validation error (message names the offending file/key).
int run_cli(int argc, const char* const* argv);

}  // namespace cortexfit
