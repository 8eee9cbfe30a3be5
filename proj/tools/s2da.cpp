#include <iostream>

#include "s2da/cli/app.hpp"

int main(int argc, char** argv) { return s2da::cli::run(argc, argv, std::cout, std::cerr); }
