#include "ecol/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return ecol::run_cli(argc, argv, std::cout, std::cerr);
}
