#include "psteer/workbench/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return psteer::workbench::cli_main(argc, argv, std::cout, std::cerr); }
