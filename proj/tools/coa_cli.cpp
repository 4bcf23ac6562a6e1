#include "coa/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return coa::run_cli(argc, argv, std::cout, std::cerr); }
