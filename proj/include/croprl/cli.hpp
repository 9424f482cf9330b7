#pragma once

namespace croprl {

// Entry point of the command front-end. Exit codes: 0 success, 2 configuration
// error, 3 data error, 4 numeric failure.
int run_cli(int argc, char** argv);

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

}  // namespace croprl
