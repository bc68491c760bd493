#include <string>
#include <vector>

#include "enko/commands.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return enko::run_cli(args);
}
