#include <iostream>

#include "hoi/cli.hpp"

int main(int argc, char** argv) { return hoi::cli_dispatch(argc, argv, std::cout, std::cerr); }
