#include <iostream>

#include "ldm/cli.hpp"

int main(int argc, char** argv) { return ldm::run_cli(argc, argv, std::cout, std::cerr); }
