#include "grampa/linops.hpp"
#include "grampa/rng.hpp"

#include <doctest.h>

#include <complex>
#include <numbers>
#include <set>
#include <thread>

using namespace grampa;
using linops::Frequency;
using linops::Vector;

namespace {

Vector random_vector(Eigen::Index n, std::uint64_t seed) {
  Rng rng(seed);
  Vector v(n);
  for (Eigen::Index k = 0; k < n; ++k) v[k] = rng.normal();
  return v;
}

/// Direct O(n^4) DFT coefficient of a row-major n x n image, scaled by 1/n.
std::complex<double> dft(const Vector& img, std::int64_t n, const Frequency& f) {
  std::complex<double> acc = 0.0;
  for (std::int64_t y = 0; y < n; ++y) {
    for (std::int64_t x = 0; x < n; ++x) {
      const double phase = -2.0 * std::numbers::pi * static_cast<double>(f.ky * y + f.kx * x) / static_cast<double>(n);
      acc += img[y * n + x] * std::polar(1.0, phase);
    }
  }
  return acc / static_cast<double>(n);
}

std::int64_t covering_line_count(std::int64_t n) {
  for (std::int64_t lines = 1; lines <= linops::radial_line_capacity(n); ++lines) {
    if (static_cast<std::int64_t>(linops::radial_line_frequencies(n, lines, 0).size()) == n * n) return lines;
  }
  return -1;
}

}  // namespace

TEST_CASE("partial Fourier forward matches a direct DFT") {
  const std::int64_t n = 8;
  const std::vector<Frequency> freqs{{0, 0}, {1, 2}, {7, 3}, {4, 4}, {2, 0}};
  const auto op = linops::make_partial_fourier(n, freqs);
  CHECK(op.rows() == 10);
  CHECK(op.cols() == 64);
  const Vector img = random_vector(64, 1);
  const Vector out = op.forward(img);
  for (std::size_t j = 0; j < freqs.size(); ++j) {
    const auto c = dft(img, n, freqs[j]);
    CHECK(out[static_cast<Eigen::Index>(j)] == doctest::Approx(c.real()).epsilon(1e-12).scale(1.0));
    CHECK(out[static_cast<Eigen::Index>(j + freqs.size())] == doctest::Approx(c.imag()).epsilon(1e-12).scale(1.0));
  }
}

TEST_CASE("partial Fourier adjoint identity and zero image") {
  const auto op = linops::make_partial_fourier_radial(16, 5, 3);
  const Vector v = random_vector(op.cols(), 4);
  const Vector w = random_vector(op.rows(), 5);
  CHECK(op.forward(v).dot(w) == doctest::Approx(v.dot(op.adjoint(w))).epsilon(1e-12));
  CHECK(op.forward(Vector::Zero(256)).isZero());
}

TEST_CASE("exact squared mode matches the dense entrywise square") {
  const auto op = linops::make_partial_fourier_radial(8, 4, 9)
                      .with_squared_mode(linops::SquaredApplicationMode::exact());
  const Eigen::MatrixXd sq = op.dense().cwiseAbs2();
  const Vector v = random_vector(op.cols(), 10).cwiseAbs();
  const Vector w = random_vector(op.rows(), 11).cwiseAbs();
  CHECK((op.squared_forward(v) - sq * v).norm() < 1e-12 * (1.0 + (sq * v).norm()));
  CHECK((op.squared_adjoint(w) - sq.transpose() * w).norm() < 1e-12 * (1.0 + (sq.transpose() * w).norm()));
}

TEST_CASE("default squared mode is uniform with the analytic Frobenius norm") {
  const std::vector<Frequency> freqs{{0, 0}, {1, 1}, {3, 2}};
  const auto op = linops::make_partial_fourier(4, freqs);
  CHECK(op.squared_mode().mode == linops::SquaredApplicationMode::Mode::uniform_scalar);
  CHECK(op.frobenius_norm_sq() == doctest::Approx(op.dense().squaredNorm()).epsilon(1e-12));
  CHECK(op.frobenius_norm_sq() == doctest::Approx(3.0));
}

TEST_CASE("realified full DFT is an isometry") {
  const std::int64_t n = 4;
  const std::int64_t lines = covering_line_count(n);
  REQUIRE(lines > 0);
  const auto op = linops::make_partial_fourier_radial(n, lines, 0);
  CHECK(op.rows() == 2 * 16);
  const Eigen::MatrixXd m = op.dense();
  CHECK((m.transpose() * m - Eigen::MatrixXd::Identity(16, 16)).cwiseAbs().maxCoeff() < 1e-10);
  const Vector v = random_vector(16, 12);
  CHECK((op.adjoint(op.forward(v)) - v).norm() < 1e-10);
}

TEST_CASE("radial line rasterization") {
  const std::int64_t n = 16;
  const auto freqs = linops::radial_line_frequencies(n, 6, 0);
  std::set<std::pair<std::int64_t, std::int64_t>> seen;
  for (const auto& f : freqs) {
    CHECK(f.ky >= 0);
    CHECK(f.ky < n);
    CHECK(f.kx >= 0);
    CHECK(f.kx < n);
    CHECK(seen.insert({f.ky, f.kx}).second);
  }
  CHECK(seen.contains({0, 0}));
  // The horizontal line (angle 0) hits every column of row 0.
  for (std::int64_t kx = 0; kx < n; ++kx) CHECK(seen.contains({0, kx}));
  // More lines never lose frequencies from the same offset rule.
  CHECK(linops::radial_line_frequencies(n, 12, 0).size() >= freqs.size());
  // Seeded offsets are deterministic.
  const auto a = linops::radial_line_frequencies(n, 5, 77);
  const auto b = linops::radial_line_frequencies(n, 5, 77);
  CHECK(a == b);
}

TEST_CASE("radial line argument errors") {
  CHECK_THROWS_AS(linops::make_partial_fourier_radial(8, linops::radial_line_capacity(8) + 1, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(linops::make_partial_fourier_radial(8, 0, 0), std::invalid_argument);
  CHECK_THROWS_AS(linops::make_partial_fourier(4, {{0, 0}, {0, 0}}), std::invalid_argument);
  CHECK_THROWS_AS(linops::make_partial_fourier(4, {{4, 0}}), std::invalid_argument);
}

TEST_CASE("concurrent applications agree with serial ones") {
  const auto op = linops::make_partial_fourier_radial(32, 8, 1);
  const Vector v = random_vector(op.cols(), 2);
  const Vector ref = op.forward(v);
  std::vector<Vector> outs(4);
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < outs.size(); ++t) threads.emplace_back([&, t] { outs[t] = op.forward(v); });
  for (auto& th : threads) th.join();
  for (const auto& o : outs) CHECK(o == ref);
}
