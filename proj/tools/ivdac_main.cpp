#include <iostream>

#include "ivdac/cli.hpp"

int main(int argc, char** argv) { return ivdac::cli::run(argc, argv, std::cout, std::cerr); }
