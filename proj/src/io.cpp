#include "grampa/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <string>

namespace grampa::io {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

template <class T>
std::array<unsigned char, sizeof(T)> to_le(T value) {
  std::array<unsigned char, sizeof(T)> bytes{};
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  return bytes;
}

template <class T>
T from_le(std::array<unsigned char, sizeof(T)> bytes) {
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value{};
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

// Next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in) {
  std::string tok;
  int c = 0;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

}  // namespace

void write_pgm16(const std::filesystem::path& path, const GrayImage& image) {
  if (image.height <= 0 || image.width <= 0 || image.pixels.size() != image.height * image.width) {
    throw std::invalid_argument("write_pgm16: inconsistent image dimensions");
  }
  auto out = open_out(path);
  out << "P5\n" << image.width << ' ' << image.height << "\n65535\n";
  for (Eigen::Index k = 0; k < image.pixels.size(); ++k) {
    const double v = std::clamp(std::isfinite(image.pixels[k]) ? image.pixels[k] : 0.0, 0.0, 1.0);
    const auto s = static_cast<std::uint16_t>(std::lround(v * 65535.0));
    const char be[2] = {static_cast<char>(s >> 8), static_cast<char>(s & 0xff)};
    out.write(be, 2);
  }
  if (!out) throw IoError("write failed: " + path.string());
}

GrayImage read_pgm16(const std::filesystem::path& path) {
  auto in = open_in(path);
  if (header_token(in) != "P5") throw IoError(path.string() + ": not a binary PGM");
  GrayImage img;
  try {
    img.width = std::stoll(header_token(in));
    img.height = std::stoll(header_token(in));
    if (std::stol(header_token(in)) != 65535) throw IoError(path.string() + ": expected maxval 65535");
  } catch (const std::logic_error&) {
    throw IoError(path.string() + ": malformed PGM header");
  }
  if (img.width <= 0 || img.height <= 0) throw IoError(path.string() + ": bad dimensions");
  img.pixels.resize(img.width * img.height);
  for (Eigen::Index k = 0; k < img.pixels.size(); ++k) {
    unsigned char be[2];
    if (!in.read(reinterpret_cast<char*>(be), 2)) throw IoError(path.string() + ": truncated pixel data");
    img.pixels[k] = static_cast<double>((be[0] << 8) | be[1]) / 65535.0;
  }
  return img;
}

void write_vector(const std::filesystem::path& path, const Eigen::VectorXd& v) {
  auto out = open_out(path);
  const auto header = to_le(static_cast<std::uint64_t>(v.size()));
  out.write(reinterpret_cast<const char*>(header.data()), header.size());
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    const auto b = to_le(v[k]);
    out.write(reinterpret_cast<const char*>(b.data()), b.size());
  }
  if (!out) throw IoError("write failed: " + path.string());
}

Eigen::VectorXd read_vector(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::array<unsigned char, 8> buf{};
  if (!in.read(reinterpret_cast<char*>(buf.data()), 8)) throw IoError(path.string() + ": missing length header");
  const auto n = from_le<std::uint64_t>(buf);
  const auto expected = 8 + 8 * static_cast<std::uintmax_t>(n);
  if (std::filesystem::file_size(path) != expected) throw IoError(path.string() + ": length header mismatch");
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    in.read(reinterpret_cast<char*>(buf.data()), 8);
    v[k] = from_le<double>(buf);
  }
  if (!in) throw IoError(path.string() + ": truncated data");
  return v;
}

void write_vector_csv(const std::filesystem::path& path, const Eigen::VectorXd& v) {
  auto out = open_out(path);
  out << std::setprecision(17);
  for (Eigen::Index k = 0; k < v.size(); ++k) out << v[k] << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace grampa::io
