#include "globalqr/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return gqr::run_cli(argc, argv, std::cout, std::cerr); }
