#include <iostream>

#include "fgwin/cli.hpp"

int main(int argc, char** argv) { return fgwin::cli::run(argc, argv, std::cin, std::cout, std::cerr); }
