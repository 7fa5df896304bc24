#include "cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return ensemble_ols::cli::run_cli(argc, argv, std::cout, std::cerr); }
