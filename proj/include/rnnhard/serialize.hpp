#pragma once

#include <Eigen/Dense>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "rnnhard/gadget.hpp"
#include "rnnhard/network.hpp"
#include "rnnhard/transforms.hpp"

namespace rnnhard {

// Binary files: 4-byte magic, u32 version, then little-endian u64 / f64
// fields; strings are u64 length + bytes. Text files print doubles with 17
// significant digits, which round-trips every finite double.

enum class Encoding { text, binary };

namespace io {

inline constexpr std::uint32_t kVersion = 1;

inline void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

inline void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

inline void put_str(std::ostream& os, const std::string& s) {
  put_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("truncated binary file");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("truncated binary file");
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

inline std::string get_str(std::istream& is) {
  const std::uint64_t n = get_u64(is);
  if (n > (1ULL << 32)) throw std::runtime_error("string length out of range");
  std::string s(n, '\0');
  if (n && !is.read(s.data(), static_cast<std::streamsize>(n))) throw std::runtime_error("truncated binary file");
  return s;
}

inline void expect_magic(std::istream& is, const char* magic) {
  char m[4];
  if (!is.read(m, 4) || std::string(m, 4) != magic) throw std::runtime_error(std::string("bad magic, expected ") + magic);
  if (get_u32(is) != kVersion) throw std::runtime_error("unsupported file version");
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& tok) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') throw std::runtime_error("bad number: " + tok);
  return v;
}

inline bool peek_magic(std::istream& is, const char* magic) {
  char m[4] = {0, 0, 0, 0};
  const auto pos = is.tellg();
  is.read(m, 4);
  const bool hit = is.gcount() == 4 && std::string(m, 4) == magic;
  is.clear();
  is.seekg(pos);
  return hit;
}

inline void write_manifest_lines(std::ostream& os, const std::string& manifest) {
  std::size_t lines = 0;
  std::istringstream in(manifest);
  std::string l;
  std::ostringstream body;
  while (std::getline(in, l)) {
    body << l << '\n';
    ++lines;
  }
  os << "manifest-lines " << lines << '\n' << body.str();
}

inline std::string read_manifest_lines(std::istream& is) {
  std::string key;
  std::size_t lines = 0;
  is >> key >> lines;
  if (key != "manifest-lines") throw std::runtime_error("expected manifest-lines");
  is.ignore(1);
  std::string out, l;
  for (std::size_t i = 0; i < lines; ++i) {
    if (!std::getline(is, l)) throw std::runtime_error("truncated manifest");
    out += l + '\n';
  }
  return out;
}

template <class T>
void expect_word(std::istream& is, const char* word, T& value) {
  std::string w;
  if (!(is >> w) || w != word || !(is >> value)) throw std::runtime_error(std::string("expected field ") + word);
}

inline double next_double(std::istream& is) {
  std::string tok;
  if (!(is >> tok)) throw std::runtime_error("truncated numeric data");
  return parse_double(tok);
}

}  // namespace io

// ------------------------------------------------------------------ samples

inline void write_sample(std::ostream& os, const LabeledSample& s, Encoding enc) {
  const auto& p = s.provenance;
  if (enc == Encoding::binary) {
    os.write("RNHS", 4);
    io::put_u32(os, io::kVersion);
    io::put_u64(os, static_cast<std::uint64_t>(s.dim()));
    io::put_u64(os, static_cast<std::uint64_t>(s.n_vars));
    io::put_u64(os, static_cast<std::uint64_t>(s.q));
    io::put_u64(os, static_cast<std::uint64_t>(s.K));
    io::put_str(os, sample_kind_name(p.kind));
    io::put_str(os, p.source);
    io::put_u64(os, p.transforms.size());
    for (const auto& t : p.transforms) io::put_str(os, t);
    io::put_f64(os, s.norm_bound);
    io::put_str(os, s.manifest);
    io::put_u64(os, s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      io::put_f64(os, static_cast<double>(s.labels[i]));
      const auto x = s.point(i);
      for (Eigen::Index j = 0; j < s.dim(); ++j) io::put_f64(os, x(j));
    }
    return;
  }
  os << "rnnhard-sample " << io::kVersion << '\n';
  os << "dim " << s.dim() << " nvars " << s.n_vars << " q " << s.q << " K " << s.K << '\n';
  os << "provenance " << sample_kind_name(p.kind) << ' ' << (p.source.empty() ? "-" : p.source) << '\n';
  os << "transforms " << p.transforms.size() << '\n';
  for (const auto& t : p.transforms) os << t << '\n';
  os << "norm_bound " << io::fmt(s.norm_bound) << '\n';
  io::write_manifest_lines(os, s.manifest);
  os << "points " << s.size() << '\n';
  for (std::size_t i = 0; i < s.size(); ++i) {
    os << s.labels[i];
    const auto x = s.point(i);
    for (Eigen::Index j = 0; j < s.dim(); ++j) os << ' ' << io::fmt(x(j));
    os << '\n';
  }
}

inline LabeledSample read_sample(std::istream& is) {
  LabeledSample s;
  if (io::peek_magic(is, "RNHS")) {
    io::expect_magic(is, "RNHS");
    const auto dim = static_cast<Eigen::Index>(io::get_u64(is));
    s.n_vars = static_cast<int>(io::get_u64(is));
    s.q = static_cast<int>(io::get_u64(is));
    s.K = static_cast<int>(io::get_u64(is));
    s.provenance.kind = parse_sample_kind(io::get_str(is));
    s.provenance.source = io::get_str(is);
    const auto nt = io::get_u64(is);
    for (std::uint64_t i = 0; i < nt; ++i) s.provenance.transforms.push_back(io::get_str(is));
    s.norm_bound = io::get_f64(is);
    s.manifest = io::get_str(is);
    const auto count = io::get_u64(is);
    s.features.resize(dim, static_cast<Eigen::Index>(count));
    s.labels.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      s.labels[i] = static_cast<int>(io::get_f64(is));
      for (Eigen::Index j = 0; j < dim; ++j) s.features(j, static_cast<Eigen::Index>(i)) = io::get_f64(is);
    }
    return s;
  }
  std::string magic;
  std::uint32_t version = 0;
  is >> magic >> version;
  if (magic != "rnnhard-sample" || version != io::kVersion) throw std::runtime_error("not a sample file");
  Eigen::Index dim = 0;
  io::expect_word(is, "dim", dim);
  io::expect_word(is, "nvars", s.n_vars);
  io::expect_word(is, "q", s.q);
  io::expect_word(is, "K", s.K);
  std::string kind, source;
  io::expect_word(is, "provenance", kind);
  is >> source;
  s.provenance.kind = parse_sample_kind(kind);
  s.provenance.source = source == "-" ? "" : source;
  std::size_t nt = 0;
  io::expect_word(is, "transforms", nt);
  is.ignore(1);
  for (std::size_t i = 0; i < nt; ++i) {
    std::string t;
    std::getline(is, t);
    s.provenance.transforms.push_back(t);
  }
  std::string nb;
  io::expect_word(is, "norm_bound", nb);
  s.norm_bound = io::parse_double(nb);
  s.manifest = io::read_manifest_lines(is);
  std::size_t count = 0;
  io::expect_word(is, "points", count);
  s.features.resize(dim, static_cast<Eigen::Index>(count));
  s.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!(is >> s.labels[i])) throw std::runtime_error("truncated sample");
    for (Eigen::Index j = 0; j < dim; ++j) s.features(j, static_cast<Eigen::Index>(i)) = io::next_double(is);
  }
  return s;
}

// ------------------------------------------------------------------ weights

inline void write_weights(std::ostream& os, const NetworkWeights& net, Encoding enc, const std::string& manifest = {}) {
  const bool fc = net.is_fc();
  static const Eigen::MatrixXd empty;
  const Eigen::MatrixXd& W = fc ? net.fc() : empty;
  const Eigen::Index n = fc ? W.rows() : net.cnn().n;
  const Eigen::Index m = fc ? W.cols() : net.cnn().patch();
  auto value = [&](Eigen::Index r, Eigen::Index c) { return fc ? W(r, c) : net.cnn().w(c); };
  const Eigen::Index rows = fc ? n : 1;
  if (enc == Encoding::binary) {
    os.write("RNHW", 4);
    io::put_u32(os, io::kVersion);
    io::put_u64(os, fc ? 0 : 1);
    io::put_u64(os, static_cast<std::uint64_t>(n));
    io::put_u64(os, static_cast<std::uint64_t>(m));
    io::put_str(os, manifest);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < m; ++c) io::put_f64(os, value(r, c));
    return;
  }
  os << "rnnhard-weights " << io::kVersion << '\n';
  os << "form " << (fc ? "fc" : "cnn") << " n " << n << (fc ? " m " : " t ") << m << '\n';
  io::write_manifest_lines(os, manifest);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < m; ++c) os << (c ? " " : "") << io::fmt(value(r, c));
    os << '\n';
  }
}

struct WeightsFile {
  NetworkWeights weights;
  std::string manifest;
};

inline WeightsFile read_weights(std::istream& is) {
  WeightsFile out;
  bool fc = true;
  Eigen::Index n = 0, m = 0;
  const bool binary = io::peek_magic(is, "RNHW");
  if (binary) {
    io::expect_magic(is, "RNHW");
    fc = io::get_u64(is) == 0;
    n = static_cast<Eigen::Index>(io::get_u64(is));
    m = static_cast<Eigen::Index>(io::get_u64(is));
    out.manifest = io::get_str(is);
  } else {
    std::string magic, form;
    std::uint32_t version = 0;
    is >> magic >> version;
    if (magic != "rnnhard-weights" || version != io::kVersion) throw std::runtime_error("not a weights file");
    io::expect_word(is, "form", form);
    fc = form == "fc";
    if (!fc && form != "cnn") throw std::runtime_error("unknown weight form: " + form);
    io::expect_word(is, "n", n);
    io::expect_word(is, fc ? "m" : "t", m);
    out.manifest = io::read_manifest_lines(is);
  }
  auto next = [&] { return binary ? io::get_f64(is) : io::next_double(is); };
  if (fc) {
    if (m > n) throw std::runtime_error("FC weights need m <= n");
    Eigen::MatrixXd W(n, m);
    for (Eigen::Index r = 0; r < n; ++r)
      for (Eigen::Index c = 0; c < m; ++c) W(r, c) = next();
    out.weights = NetworkWeights(std::move(W));
  } else {
    CnnFilter f;
    f.n = n;
    f.w.resize(m);
    for (Eigen::Index c = 0; c < m; ++c) f.w(c) = next();
    if (m == 0 || (n != 0 && n % m != 0)) throw std::runtime_error("filter length must divide n");
    out.weights = NetworkWeights(std::move(f));
  }
  return out;
}

// --------------------------------------------------------------- transforms

inline void write_transform(std::ostream& os, const BlockTransform& M, const std::string& manifest = {}) {
  os.write("RNHT", 4);
  io::put_u32(os, io::kVersion);
  io::put_str(os, M.family());
  io::put_u64(os, static_cast<std::uint64_t>(M.blocks()));
  io::put_u64(os, static_cast<std::uint64_t>(M.block_size()));
  io::put_f64(os, M.smin());
  io::put_f64(os, M.smax());
  io::put_f64(os, M.condition());
  io::put_str(os, manifest);
  for (double v : M.diagonals()) io::put_f64(os, v);
}

inline BlockTransform read_transform(std::istream& is) {
  io::expect_magic(is, "RNHT");
  std::string family = io::get_str(is);
  const auto k = static_cast<Eigen::Index>(io::get_u64(is));
  const auto s = static_cast<Eigen::Index>(io::get_u64(is));
  for (int i = 0; i < 3; ++i) io::get_f64(is);  // recomputed on load
  io::get_str(is);
  std::vector<double> z(static_cast<std::size_t>(k * k * s));
  for (auto& v : z) v = io::get_f64(is);
  return BlockTransform(k, s, std::move(z), std::move(family));
}

inline void write_cnn_transform(std::ostream& os, const CnnTransform& T, const std::string& manifest = {}) {
  os.write("RNHP", 4);
  io::put_u32(os, io::kVersion);
  io::put_str(os, T.family);
  io::put_u64(os, static_cast<std::uint64_t>(T.weight_map.rows()));
  io::put_f64(os, T.min_abs_diag);
  io::put_f64(os, T.smin);
  io::put_f64(os, T.smax);
  io::put_f64(os, T.condition());
  io::put_str(os, manifest);
  for (const auto* A : {&T.weight_map, &T.patch_map})
    for (Eigen::Index r = 0; r < A->rows(); ++r)
      for (Eigen::Index c = 0; c < A->cols(); ++c) io::put_f64(os, (*A)(r, c));
}

inline CnnTransform read_cnn_transform(std::istream& is) {
  io::expect_magic(is, "RNHP");
  CnnTransform T;
  T.family = io::get_str(is);
  const auto t = static_cast<Eigen::Index>(io::get_u64(is));
  T.min_abs_diag = io::get_f64(is);
  T.smin = io::get_f64(is);
  T.smax = io::get_f64(is);
  io::get_f64(is);
  io::get_str(is);
  for (auto* A : {&T.weight_map, &T.patch_map}) {
    A->resize(t, t);
    for (Eigen::Index r = 0; r < t; ++r)
      for (Eigen::Index c = 0; c < t; ++c) (*A)(r, c) = io::get_f64(is);
  }
  return T;
}

// ------------------------------------------------------------------ files

template <class Writer>
void write_file(const std::string& path, Writer&& w) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  w(os);
  if (!os) throw std::runtime_error("write failed: " + path);
}

template <class Reader>
auto read_file(const std::string& path, Reader&& r) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for reading: " + path);
  return r(is);
}

}  // namespace rnnhard
