#pragma once

namespace speedfill {

/// Parses argv and runs one subcommand. Returns 0 on success, 2 on usage
/// errors and 1 when the data cannot be processed.
int run_command(int argc, char** argv);

}  // namespace speedfill
