#include "mopf/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return mopf::run_cli(argc, argv, std::cout, std::cerr);
}
