#include "mobiload/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return mobiload::cli::run(argc, argv, std::cout, std::cerr); }
