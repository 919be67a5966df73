#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace ptycho {

using cplx = std::complex<double>;

/// Row-major 2D array. Value semantic.
template <typename T>
class Array2D {
 public:
  Array2D() = default;
  Array2D(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  bool same_shape(const Array2D& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  friend bool operator==(const Array2D&, const Array2D&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using RealArray = Array2D<double>;

/// Complex 2D field sampled on a square-pixel grid of physical pitch (meters).
///
/// Both dimensions are even and at least 2, so the centered FFT is its own
/// shift inverse; pitch is positive and finite.
class ComplexField : public Array2D<cplx> {
 public:
  ComplexField() = default;
  ComplexField(std::size_t rows, std::size_t cols, double pitch, cplx fill = {});

  double pitch() const noexcept { return pitch_; }
  void set_pitch(double pitch);

  friend bool operator==(const ComplexField&, const ComplexField&) = default;

 private:
  double pitch_ = 1.0;
};

/// Spatial angular frequencies (rad/m) matching a field's shape and pitch.
///
/// Laid out in the centered order produced by fft2_unitary: index c holds
/// 2*pi*(c - N/2)/(N*pitch), so index 0 carries -pi/pitch.
struct FrequencyGrid {
  std::vector<double> ky;  // per row
  std::vector<double> kx;  // per column
  double pitch = 1.0;      // spatial pitch the grid was built for

  std::size_t rows() const noexcept { return ky.size(); }
  std::size_t cols() const noexcept { return kx.size(); }
  double k_perp_squared(std::size_t r, std::size_t c) const { return ky[r] * ky[r] + kx[c] * kx[c]; }
};

FrequencyGrid frequency_grid(std::size_t rows, std::size_t cols, double pitch);
inline FrequencyGrid frequency_grid(const ComplexField& f) {
  return frequency_grid(f.rows(), f.cols(), f.pitch());
}

/// Throws NonFiniteError naming the first non-finite element.
void require_finite(std::span<const cplx> values, const char* where);
void require_finite(std::span<const double> values, const char* where);

/// Centered unitary DFT: fftshift(DFT(ifftshift(f))) / sqrt(rows*cols).
ComplexField fft2_unitary(const ComplexField& f);
/// Exact inverse of fft2_unitary.
ComplexField ifft2_unitary(const ComplexField& f);

/// In-place variants used on hot paths; they skip the finiteness scan.
void fft2_unitary_inplace(ComplexField& f);
void ifft2_unitary_inplace(ComplexField& f);

/// Sum of |f|^2.
double energy(const ComplexField& f);
double energy(std::span<const cplx> values);

/// Inner product sum(a * conj(b)).
cplx inner(std::span<const cplx> a, std::span<const cplx> b);

/// Circular shift: out(r, c) = f(r - dy, c - dx).
ComplexField circshift(const ComplexField& f, long dy, long dx);

struct PixelShift {
  long dy = 0;
  long dx = 0;
  friend bool operator==(const PixelShift&, const PixelShift&) = default;
};

/// Integer translation d maximizing |sum_r conj(a(r)) b(r + d)|, so that
/// shift_register(a, circshift(a, d)) == d. Offsets are reported in
/// [-N/2, N/2); exact ties resolve to the lexicographically smallest (dy, dx).
PixelShift shift_register(const ComplexField& a, const ComplexField& b);

/// Circular cross-correlation: out(d) = sum_r conj(a(r)) b(r + d), with d
/// stored at index (d mod rows, d mod cols).
Array2D<cplx> cross_correlation(const ComplexField& a, const ComplexField& b);

/// Signed offset for a correlation index, in [-N/2, N/2).
inline long signed_offset(std::size_t index, std::size_t n) {
  const long i = static_cast<long>(index);
  const long h = static_cast<long>(n / 2);
  return i >= h ? i - static_cast<long>(n) : i;
}

namespace detail {
/// Plain (uncentered, unnormalized) forward/backward DFT through the shared plan cache.
void dft2(std::size_t rows, std::size_t cols, const cplx* in, cplx* out, bool inverse);
}  // namespace detail

}  // namespace ptycho
