#include <iostream>

#include "henonlab/cli.hpp"

int main(int argc, char** argv) { return henon::run(argc, argv, std::cout, std::cerr); }
