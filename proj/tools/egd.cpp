#include <iostream>

#include "egd/cli.hpp"

int main(int argc, char** argv) { return egd::cli::run(argc, argv, std::cout, std::cerr); }
