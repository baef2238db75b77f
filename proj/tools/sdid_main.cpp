#include "sdid/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return sdid::cli::main(argc, argv, std::cout, std::cerr); }
