#include <iostream>

#include "covuln/cli.hpp"

int main(int argc, char** argv) { return covuln::run_cli(argc, argv, std::cout, std::cerr); }
