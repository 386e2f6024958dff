#include <iostream>

#include "runner.hpp"

int main(int argc, char** argv) { return jellium::cli::run_cli(argc, argv, std::cout, std::cerr); }
