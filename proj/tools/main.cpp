#include "bsdelab/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return bsdelab::cli::main_entry(argc, argv, std::cout, std::cerr); }
