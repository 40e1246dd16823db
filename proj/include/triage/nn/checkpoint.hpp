#pragma once

// Plain-text network checkpoints. Values are written in shortest
// round-trip form, so save -> load reproduces every weight bit for bit.
//
//   triage-mlp 1
//   layers <L>
//   layer <fan_in> <fan_out> <activation>
//   w <fan_out*fan_in values, row-major>
//   b <fan_out values>
//   ...

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>

#include "triage/nn/mlp.hpp"

namespace triage::nn {

inline std::string format_double(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& tok) {
  double x = 0.0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), x);
  if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
    throw std::runtime_error("checkpoint: bad number '" + tok + "'");
  return x;
}

inline void write_mlp(std::ostream& os, const Mlp& net) {
  os << "triage-mlp 1\n";
  os << "layers " << net.layers().size() << "\n";
  for (const auto& l : net.layers()) {
    os << "layer " << l.fan_in() << " " << l.fan_out() << " " << to_string(l.act) << "\n";
    os << "w";
    for (Eigen::Index i = 0; i < l.weight.rows(); ++i)
      for (Eigen::Index j = 0; j < l.weight.cols(); ++j) os << " " << format_double(l.weight(i, j));
    os << "\nb";
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) os << " " << format_double(l.bias(i));
    os << "\n";
  }
}

inline Mlp read_mlp(std::istream& is) {
  auto expect = [&](const std::string& word) {
    std::string tok;
    if (!(is >> tok) || tok != word)
      throw std::runtime_error("checkpoint: expected '" + word + "', got '" + tok + "'");
  };
  auto next = [&]() {
    std::string tok;
    if (!(is >> tok)) throw std::runtime_error("checkpoint: unexpected end of input");
    return tok;
  };
  expect("triage-mlp");
  if (next() != "1") throw std::runtime_error("checkpoint: unsupported version");
  expect("layers");
  const long count = std::stol(next());
  if (count < 1) throw std::runtime_error("checkpoint: no layers");
  std::vector<Layer> layers;
  for (long k = 0; k < count; ++k) {
    expect("layer");
    const long fan_in = std::stol(next());
    const long fan_out = std::stol(next());
    if (fan_in < 1 || fan_out < 1) throw std::runtime_error("checkpoint: bad layer shape");
    Layer l{Matrix(fan_out, fan_in), Vector(fan_out), activation_from_string(next())};
    expect("w");
    for (long i = 0; i < fan_out; ++i)
      for (long j = 0; j < fan_in; ++j) l.weight(i, j) = parse_double(next());
    expect("b");
    for (long i = 0; i < fan_out; ++i) l.bias(i) = parse_double(next());
    layers.push_back(std::move(l));
  }
  return Mlp(std::move(layers));
}

inline std::string to_text(const Mlp& net) {
  std::ostringstream os;
  write_mlp(os, net);
  return os.str();
}

inline Mlp from_text(const std::string& text) {
  std::istringstream is(text);
  return read_mlp(is);
}

inline void save_mlp(const Mlp& net, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
  write_mlp(os, net);
}

inline Mlp load_mlp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  return read_mlp(is);
}

}  // namespace triage::nn
