#include <iostream>

#include "aalguard/cli/commands.hpp"

int main(int argc, char** argv) {
    return aalguard::cli::run(argc, argv, std::cout, std::cerr);
}
