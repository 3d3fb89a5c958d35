#include <iostream>

#include "ctsev/cli.hpp"

int main(int argc, char** argv) { return ctsev::run_cli(argc, argv, std::cout, std::cerr); }
