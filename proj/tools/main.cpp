// Copyright 2026 The DRO-LT Authors
// Licensed under the Apache License, Version 2.0

#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) { return drolt::cli::run(argc, argv, std::cout, std::cerr); }
