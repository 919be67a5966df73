#include <iostream>

#include "ptycho/cli.hpp"

int main(int argc, char** argv) { return ptycho::run_cli(argc, argv, std::cout, std::cerr); }
