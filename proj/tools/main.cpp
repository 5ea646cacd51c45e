#include <iostream>

#include "pgx/cli.hpp"

int main(int argc, char** argv) { return pgx::cli::run(argc, argv, std::cout, std::cerr); }
