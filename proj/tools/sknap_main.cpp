#include <string>
#include <vector>

#include "sknap/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return sknap::cli::run(args);
}
