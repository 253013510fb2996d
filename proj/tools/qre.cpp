// Copyright Contributors to the qre-toolkit Project
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "qre/cli.hpp"

int main(int argc, char** argv) { return qre::cli::dispatch(argc, argv, std::cin, std::cout, std::cerr); }
