#include <iostream>

#include "calens/cli.hpp"

int main(int argc, char** argv) { return calens::cli::run(argc, argv, std::cout, std::cerr); }
