#include <iostream>

#include "manifestd/cli.hpp"

int main(int argc, char** argv) { return manifestd::cli::run_cli(argc, argv, std::cout, std::cerr); }
