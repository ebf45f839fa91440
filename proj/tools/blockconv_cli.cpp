// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "blockconv/cli.hpp"

int main(int argc, char** argv) {
    return bconv::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
