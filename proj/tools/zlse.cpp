#include <iostream>

#include "zlse/cli.hpp"

int main(int argc, char** argv) { return zlse::run_cli(argc, argv, std::cout, std::cerr); }
