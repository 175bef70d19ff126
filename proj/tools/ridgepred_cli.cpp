#include <iostream>

#include "ridgepred/cli.hpp"

int main(int argc, char** argv) { return ridgepred::main_entry(argc, argv, std::cout, std::cerr); }
