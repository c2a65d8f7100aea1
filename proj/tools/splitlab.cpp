#include "splitlab/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return splitlab::cli::run(argc, argv, std::cout, std::cerr); }
