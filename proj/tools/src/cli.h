#ifndef OVB_TOOLS_CLI_H_
#define OVB_TOOLS_CLI_H_

#include <ostream>

#include "ovb/error.h"

namespace ovb::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

int exit_code_for(ErrorKind kind);

// Entry point behind the `ovb` executable. Never throws.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace ovb::cli

#endif  // OVB_TOOLS_CLI_H_
