#pragma once

#include <string>
#include <vector>

#include "enko/config.hpp"

namespace enko {

// Exit codes: 0 success, 2 configuration/validation error, 3 runtime failure.
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

void cmd_generate(const Config& cfg);
void cmd_train(const Config& cfg);
void cmd_evaluate(const Config& cfg);
void cmd_gradvar(const Config& cfg);
void cmd_sweep(const Config& cfg);

// Full CLI entry: args are everything after the program name. Returns an
// exit code; never throws.
int run_cli(const std::vector<std::string>& args);

}  // namespace enko
