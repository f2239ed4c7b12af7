#include "grampa/linops.hpp"
#include "grampa/rng.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace grampa::linops {

namespace {

// FFTW's planner is not thread-safe; execution of an existing plan on fresh arrays is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class Fft2d {
 public:
  explicit Fft2d(std::int64_t n) : n_(n) {
    std::vector<std::complex<double>> a(static_cast<std::size_t>(n * n));
    std::vector<std::complex<double>> b(a.size());
    const int flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    std::lock_guard lock(planner_mutex());
    fwd_ = fftw_plan_dft_2d(static_cast<int>(n), static_cast<int>(n), as_fftw(a.data()), as_fftw(b.data()),
                            FFTW_FORWARD, flags);
    bwd_ = fftw_plan_dft_2d(static_cast<int>(n), static_cast<int>(n), as_fftw(a.data()), as_fftw(b.data()),
                            FFTW_BACKWARD, flags);
    if (fwd_ == nullptr || bwd_ == nullptr) throw std::runtime_error("FFTW planning failed");
  }
  ~Fft2d() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
  }
  Fft2d(const Fft2d&) = delete;
  Fft2d& operator=(const Fft2d&) = delete;

  // Unnormalized: forward uses exp(-i...), backward exp(+i...).
  void forward(std::vector<std::complex<double>>& in, std::vector<std::complex<double>>& out) const {
    fftw_execute_dft(fwd_, as_fftw(in.data()), as_fftw(out.data()));
  }
  void backward(std::vector<std::complex<double>>& in, std::vector<std::complex<double>>& out) const {
    fftw_execute_dft(bwd_, as_fftw(in.data()), as_fftw(out.data()));
  }
  std::int64_t n() const { return n_; }

 private:
  static fftw_complex* as_fftw(std::complex<double>* p) { return reinterpret_cast<fftw_complex*>(p); }

  std::int64_t n_;
  fftw_plan fwd_ = nullptr;
  fftw_plan bwd_ = nullptr;
};

class PartialFourierKernel final : public detail::OperatorKernel {
 public:
  PartialFourierKernel(std::int64_t n, std::vector<Frequency> freqs)
      : OperatorKernel(2 * static_cast<std::int64_t>(freqs.size()), n * n), fft_(n), freqs_(std::move(freqs)) {
    index_.reserve(freqs_.size());
    doubled_.reserve(freqs_.size());
    for (const auto& f : freqs_) {
      index_.push_back(f.ky * n + f.kx);
      doubled_.push_back(((2 * f.ky) % n) * n + (2 * f.kx) % n);
    }
  }

  Kernel tag() const override { return Kernel::partial_fourier_realified; }

  void forward(const VectorRef& v, Eigen::Ref<Vector> out) const override {
    const auto spectrum = transform(v);
    const double scale = 1.0 / static_cast<double>(fft_.n());
    const auto k = index_.size();
    for (std::size_t j = 0; j < k; ++j) {
      out[j] = spectrum[index_[j]].real() * scale;
      out[k + j] = spectrum[index_[j]].imag() * scale;
    }
  }

  void adjoint(const VectorRef& w, Eigen::Ref<Vector> out) const override {
    const auto k = index_.size();
    std::vector<std::complex<double>> c(static_cast<std::size_t>(cols()));
    for (std::size_t j = 0; j < k; ++j) c[index_[j]] += std::complex<double>(w[j], w[k + j]);
    std::vector<std::complex<double>> img(c.size());
    fft_.backward(c, img);
    const double scale = 1.0 / static_cast<double>(fft_.n());
    for (Eigen::Index m = 0; m < out.size(); ++m) out[m] = img[m].real() * scale;
  }

  // |Re row|^2 entries are (1 + cos(2 theta)) / (2 n^2) and |Im row|^2 are (1 - cos(2 theta)) / (2 n^2),
  // so both squared applications reduce to one FFT at the doubled frequencies.
  void squared_forward(const VectorRef& v, Eigen::Ref<Vector> out) const override {
    const auto spectrum = transform(v);
    const double total = v.sum();
    const double scale = 0.5 / static_cast<double>(fft_.n() * fft_.n());
    const auto k = doubled_.size();
    for (std::size_t j = 0; j < k; ++j) {
      const double c = spectrum[doubled_[j]].real();
      out[j] = (total + c) * scale;
      out[k + j] = (total - c) * scale;
    }
  }

  void squared_adjoint(const VectorRef& w, Eigen::Ref<Vector> out) const override {
    const auto k = doubled_.size();
    std::vector<std::complex<double>> c(static_cast<std::size_t>(cols()));
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      c[doubled_[j]] += w[j] - w[k + j];
      total += w[j] + w[k + j];
    }
    std::vector<std::complex<double>> img(c.size());
    fft_.backward(c, img);
    const double scale = 0.5 / static_cast<double>(fft_.n() * fft_.n());
    for (Eigen::Index m = 0; m < out.size(); ++m) out[m] = (total + img[m].real()) * scale;
  }

  // Each selected frequency contributes one Re and one Im row whose squared norms sum to 1.
  double frobenius_norm_sq() const override { return static_cast<double>(freqs_.size()); }

 private:
  std::vector<std::complex<double>> transform(const VectorRef& v) const {
    std::vector<std::complex<double>> in(static_cast<std::size_t>(cols()));
    for (Eigen::Index m = 0; m < v.size(); ++m) in[m] = v[m];
    std::vector<std::complex<double>> spectrum(in.size());
    fft_.forward(in, spectrum);
    return spectrum;
  }

  Fft2d fft_;
  std::vector<Frequency> freqs_;
  std::vector<std::int64_t> index_;
  std::vector<std::int64_t> doubled_;
};

bool is_power_of_two(std::int64_t n) { return n > 0 && (n & (n - 1)) == 0; }

std::int64_t wrap(std::int64_t k, std::int64_t n) { return ((k % n) + n) % n; }

}  // namespace

std::int64_t radial_line_capacity(std::int64_t n) { return 2 * n; }

std::vector<Frequency> radial_line_frequencies(std::int64_t n, std::int64_t lines, std::uint64_t seed) {
  if (!is_power_of_two(n)) throw std::invalid_argument("radial lines: n must be a power of two");
  if (lines < 1 || lines > radial_line_capacity(n)) {
    throw std::invalid_argument("radial lines: line count must be in [1, " +
                                std::to_string(radial_line_capacity(n)) + "]");
  }
  double offset = 0.0;
  if (seed != 0) {
    Rng rng(seed);
    offset = rng.uniform();
  }

  std::vector<Frequency> out;
  std::vector<char> seen(static_cast<std::size_t>(n * n), 0);
  const std::int64_t half = n / 2;
  for (std::int64_t l = 0; l < lines; ++l) {
    const double theta = std::numbers::pi * (static_cast<double>(l) + offset) / static_cast<double>(lines);
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    const bool x_major = std::abs(c) >= std::abs(s);
    for (std::int64_t t = -half; t <= half; ++t) {
      std::int64_t kx = 0;
      std::int64_t ky = 0;
      if (x_major) {
        kx = t;
        ky = std::llround(static_cast<double>(t) * s / c);
      } else {
        ky = t;
        kx = std::llround(static_cast<double>(t) * c / s);
      }
      const Frequency f{wrap(ky, n), wrap(kx, n)};
      auto& mark = seen[static_cast<std::size_t>(f.ky * n + f.kx)];
      if (!mark) {
        mark = 1;
        out.push_back(f);
      }
    }
  }
  return out;
}

LinearOperator make_partial_fourier(std::int64_t n, std::vector<Frequency> frequencies) {
  if (!is_power_of_two(n)) throw std::invalid_argument("partial fourier: n must be a power of two");
  if (frequencies.empty()) throw std::invalid_argument("partial fourier: no frequencies selected");
  std::vector<char> seen(static_cast<std::size_t>(n * n), 0);
  for (const auto& f : frequencies) {
    if (f.ky < 0 || f.ky >= n || f.kx < 0 || f.kx >= n) {
      throw std::invalid_argument("partial fourier: frequency out of range");
    }
    auto& mark = seen[static_cast<std::size_t>(f.ky * n + f.kx)];
    if (mark) throw std::invalid_argument("partial fourier: duplicate frequency");
    mark = 1;
  }
  auto kernel = std::make_shared<PartialFourierKernel>(n, std::move(frequencies));
  const double frob = kernel->frobenius_norm_sq();
  return LinearOperator(std::move(kernel), SquaredApplicationMode::uniform(frob));
}

LinearOperator make_partial_fourier_radial(std::int64_t n, std::int64_t lines, std::uint64_t seed) {
  return make_partial_fourier(n, radial_line_frequencies(n, lines, seed));
}

}  // namespace grampa::linops
