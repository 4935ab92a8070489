#include <iostream>

#include "iabsim/cli.hpp"

int main(int argc, char** argv) { return iabsim::run_cli(argc, argv, std::cout, std::cerr); }
