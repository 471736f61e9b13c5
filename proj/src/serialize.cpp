// Copyright 2026 The DRO-LT Authors
// Licensed under the Apache License, Version 2.0

#include "serialize.hpp"

#include <iterator>
#include <sstream>

#include "drolt/error.hpp"

namespace drolt::serialize {

void write_shape(std::ostream& os, const NetworkShape& s) {
  os << "input_dim " << s.input_dim << '\n';
  os << "hidden " << s.hidden_widths.size();
  for (int w : s.hidden_widths) os << ' ' << w;
  os << '\n';
  os << "embedding_dim " << s.embedding_dim << '\n';
  os << "num_classes " << s.num_classes << '\n';
  os << "activation " << to_string(s.activation) << '\n';
  os << "activate_embedding " << (s.activate_embedding ? 1 : 0) << '\n';
}

namespace {

int to_int(textio::LineReader& r, const std::string& tok) {
  auto v = textio::parse_int(tok);
  if (!v) r.fail("malformed integer '" + tok + "'");
  return static_cast<int>(*v);
}

}  // namespace

NetworkShape read_shape(textio::LineReader& r) {
  NetworkShape s;
  s.input_dim = to_int(r, r.expect_record("input_dim", 1)[0]);
  {
    auto toks = textio::tokens(r.expect("hidden"));
    if (toks.size() < 2 || toks[0] != "hidden") r.fail("expected record 'hidden'");
    const int k = to_int(r, toks[1]);
    if (k < 0 || toks.size() != static_cast<std::size_t>(k) + 2) r.fail("record 'hidden' has the wrong length");
    s.hidden_widths.clear();
    for (int i = 0; i < k; ++i) s.hidden_widths.push_back(to_int(r, toks[i + 2]));
  }
  s.embedding_dim = to_int(r, r.expect_record("embedding_dim", 1)[0]);
  s.num_classes = to_int(r, r.expect_record("num_classes", 1)[0]);
  try {
    s.activation = parse_activation(r.expect_record("activation", 1)[0]);
  } catch (const DomainError& e) {
    r.fail(e.what());
  }
  s.activate_embedding = to_int(r, r.expect_record("activate_embedding", 1)[0]) != 0;
  return s;
}

void write_matrix(std::ostream& os, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? " " : "") << textio::exact(m(i, j));
    os << '\n';
  }
}

Matrix read_matrix(textio::LineReader& r, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    auto toks = textio::tokens(r.expect("matrix row"));
    if (toks.size() != static_cast<std::size_t>(cols)) r.fail("matrix row expects " + std::to_string(cols) + " values");
    for (Eigen::Index j = 0; j < cols; ++j) {
      auto v = textio::parse_double(toks[j]);
      if (!v) r.fail("malformed number '" + toks[j] + "'");
      m(i, j) = *v;
    }
  }
  return m;
}

void write_parameters(std::ostream& os, std::string_view key, const Parameters& p) {
  os << key << ' ' << p.weights.size() << '\n';
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    os << "layer " << l << ' ' << p.weights[l].rows() << ' ' << p.weights[l].cols() << '\n';
    write_matrix(os, p.weights[l]);
    Matrix b = p.biases[l].transpose();
    write_matrix(os, b);
  }
}

Parameters read_parameters(textio::LineReader& r, std::string_view key, const Parameters& like) {
  const auto layers = to_int(r, r.expect_record(key, 1)[0]);
  if (layers != static_cast<int>(like.weights.size())) r.fail("parameter block has the wrong number of layers");
  Parameters p;
  for (int l = 0; l < layers; ++l) {
    auto hdr = r.expect_record("layer", 3);
    const int rows = to_int(r, hdr[1]);
    const int cols = to_int(r, hdr[2]);
    if (to_int(r, hdr[0]) != l || rows != like.weights[l].rows() || cols != like.weights[l].cols()) {
      r.fail("layer header does not match the network shape");
    }
    p.weights.push_back(read_matrix(r, rows, cols));
    p.biases.push_back(read_matrix(r, 1, rows).row(0).transpose());
  }
  return p;
}

void write_reals(std::ostream& os, std::string_view key, const std::vector<double>& v) {
  os << key << ' ' << v.size();
  for (double x : v) os << ' ' << textio::exact(x);
  os << '\n';
}

std::vector<double> read_reals(textio::LineReader& r, std::string_view key, std::size_t count) {
  auto toks = textio::tokens(r.expect(key));
  if (toks.size() < 2 || toks[0] != key) r.fail("expected record '" + std::string(key) + "'");
  const auto n = textio::parse_int(toks[1]);
  if (!n || *n != static_cast<long long>(count) || toks.size() != count + 2) {
    r.fail("record '" + std::string(key) + "' expects " + std::to_string(count) + " values");
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < count; ++i) {
    auto v = textio::parse_double(toks[i + 2]);
    if (!v) r.fail("malformed number '" + toks[i + 2] + "'");
    out.push_back(*v);
  }
  return out;
}

std::string read_checked(std::istream& is, std::string_view magic, int version) {
  const std::string all((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  std::istringstream in(all);
  textio::LineReader r(in);
  if (textio::trim(r.expect("header")) != magic) r.fail("not a " + std::string(magic) + " file");
  const auto vtok = r.expect_record("version", 1)[0];
  const auto v = textio::parse_int(vtok);
  if (!v) r.fail("malformed version '" + vtok + "'");
  if (*v != version) {
    throw VersionError("unsupported " + std::string(magic) + " format version " + std::to_string(*v) +
                       " (supported: " + std::to_string(version) + ")");
  }
  // body: everything after the version line up to the final checksum line
  const std::size_t after_version = r.consumed();
  const std::size_t ck = all.rfind("checksum ");
  if (ck == std::string::npos || ck < after_version || (ck > 0 && all[ck - 1] != '\n')) {
    throw IntegrityError(std::string(magic) + ": missing checksum line (file truncated or corrupted)");
  }
  const std::string body = all.substr(after_version, ck - after_version);
  const std::string stored(textio::trim(std::string_view(all).substr(ck + 9)));
  if (stored != textio::hex64(textio::fnv1a(body))) {
    throw IntegrityError(std::string(magic) + ": checksum mismatch (file corrupted)");
  }
  return body;
}

}  // namespace drolt::serialize
