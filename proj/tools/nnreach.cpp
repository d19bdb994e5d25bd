#include "nnreach/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return nnreach::run_cli(argc, argv, std::cout, std::cerr); }
