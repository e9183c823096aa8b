// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "faultline/cli.hpp"

int main(int argc, char** argv) { return faultline::cli::main(argc, argv, std::cout, std::cerr); }
