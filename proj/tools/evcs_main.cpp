#include <iostream>

#include "evcs/cli.hpp"

int main(int argc, char** argv) { return evcs::run_cli(argc, argv, std::cout, std::cerr); }
