#include <iostream>

#include "sra/cli.hpp"

int main(int argc, char** argv) { return sra::cli::run(argc, argv, std::cout, std::cerr); }
