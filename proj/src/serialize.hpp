// Copyright 2026 The DRO-LT Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "drolt/model.hpp"
#include "textio.hpp"

namespace drolt::serialize {

void write_shape(std::ostream& os, const NetworkShape& shape);
NetworkShape read_shape(textio::LineReader& r);

void write_matrix(std::ostream& os, const Matrix& m);
Matrix read_matrix(textio::LineReader& r, Eigen::Index rows, Eigen::Index cols);

/// "<key> <layers>" then each weight matrix and bias vector.
void write_parameters(std::ostream& os, std::string_view key, const Parameters& p);
/// `like` fixes the expected shapes.
Parameters read_parameters(textio::LineReader& r, std::string_view key, const Parameters& like);

void write_reals(std::ostream& os, std::string_view key, const std::vector<double>& v);
std::vector<double> read_reals(textio::LineReader& r, std::string_view key, std::size_t count);

/// Reads "<magic>\nversion N\n<body>checksum H\n" and returns <body> after verifying H.
/// Throws ParseError, VersionError or IntegrityError.
std::string read_checked(std::istream& is, std::string_view magic, int version);

}  // namespace drolt::serialize
