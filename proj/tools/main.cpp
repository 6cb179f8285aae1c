// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "grnfuse/cli.hpp"

int main(int argc, char** argv) { return grnfuse::run_cli(argc, argv, std::cout, std::cerr); }
