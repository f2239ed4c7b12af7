#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <stdexcept>

namespace grampa::io {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GrayImage {
  std::int64_t height = 0;
  std::int64_t width = 0;
  Eigen::VectorXd pixels;  // row-major, values in [0, 1]
};

/// Binary PGM (P5), maxval 65535, big-endian samples. Values are clipped to [0, 1].
void write_pgm16(const std::filesystem::path& path, const GrayImage& image);
GrayImage read_pgm16(const std::filesystem::path& path);

/// uint64 little-endian element count followed by little-endian float64 values.
void write_vector(const std::filesystem::path& path, const Eigen::VectorXd& v);
Eigen::VectorXd read_vector(const std::filesystem::path& path);

/// One value per line, 17 significant digits.
void write_vector_csv(const std::filesystem::path& path, const Eigen::VectorXd& v);

}  // namespace grampa::io
