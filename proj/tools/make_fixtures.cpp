// Writes the synthetic datasets, fact-check corpus, source maps, URL cache
// and miniature encoder checkpoint used by the tests and the acceptance run.
#include "ecol/fixtures.hpp"

#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <string>

int main(int argc, char** argv) {
    if (argc < 2 || argc > 3) {
        std::cerr << "usage: make_fixtures <output-dir> [seed]\n";
        return 2;
    }
    const uint64_t seed = argc == 3 ? std::strtoull(argv[2], nullptr, 10) : 1337;
    try {
        ecol::write_all_fixtures(argv[1], seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cout << "wrote fixtures to " << argv[1] << "\n";
    return 0;
}
