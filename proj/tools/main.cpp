#include <iostream>

#include "qkdnoise/cli.hpp"

int main(int argc, char** argv) { return qkdnoise::cli::run(argc, argv, std::cout, std::cerr); }
