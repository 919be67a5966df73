#include "ptycho/fields.hpp"

#include <fftw3.h>
#include <fmt/format.h>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>

#include "ptycho/error.hpp"

namespace ptycho {

ComplexField::ComplexField(std::size_t rows, std::size_t cols, double pitch, cplx fill)
    : Array2D<cplx>(rows, cols, fill) {
  if (rows < 2 || cols < 2 || rows % 2 != 0 || cols % 2 != 0) {
    throw Error(ErrorKind::InvalidArgument,
                fmt::format("field shape {}x{} must be even and at least 2x2", rows, cols));
  }
  set_pitch(pitch);
}

void ComplexField::set_pitch(double pitch) {
  if (!(pitch > 0.0) || !std::isfinite(pitch)) {
    throw Error(ErrorKind::InvalidArgument, fmt::format("pixel pitch {} must be positive", pitch));
  }
  pitch_ = pitch;
}

FrequencyGrid frequency_grid(std::size_t rows, std::size_t cols, double pitch) {
  auto axis = [pitch](std::size_t n) {
    std::vector<double> k(n);
    const double step = 2.0 * std::numbers::pi / (static_cast<double>(n) * pitch);
    for (std::size_t i = 0; i < n; ++i) {
      k[i] = step * (static_cast<double>(i) - static_cast<double>(n / 2));
    }
    return k;
  };
  return FrequencyGrid{axis(rows), axis(cols), pitch};
}

void require_finite(std::span<const cplx> values, const char* where) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i].real()) || !std::isfinite(values[i].imag())) {
      throw NonFiniteError(i, where);
    }
  }
}

void require_finite(std::span<const double> values, const char* where) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) throw NonFiniteError(i, where);
  }
}

namespace detail {
namespace {

// Plans are created with FFTW_UNALIGNED for out-of-place transforms so any
// buffer pair can be handed to fftw_execute_dft, which is thread-safe.
// Planning itself is not thread-safe and is serialized here.
class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(std::size_t rows, std::size_t cols, bool inverse) {
    const auto key = std::make_tuple(rows, cols, inverse);
    std::lock_guard lock(mutex_);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    auto* in = fftw_alloc_complex(rows * cols);
    auto* out = fftw_alloc_complex(rows * cols);
    fftw_plan plan = fftw_plan_dft_2d(static_cast<int>(rows), static_cast<int>(cols), in, out,
                                      inverse ? FFTW_BACKWARD : FFTW_FORWARD,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(in);
    fftw_free(out);
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<std::size_t, std::size_t, bool>, fftw_plan> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

}  // namespace

void dft2(std::size_t rows, std::size_t cols, const cplx* in, cplx* out, bool inverse) {
  fftw_plan plan = plan_cache().get(rows, cols, inverse);
  // fftw never writes through `in` for out-of-place complex transforms.
  fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in)),
                   reinterpret_cast<fftw_complex*>(out));
}

}  // namespace detail

namespace {

// For even sizes the centering shifts reduce to a checkerboard modulation on
// both sides of the plain DFT plus a global sign (-1)^((rows + cols) / 2).
void centered_transform(ComplexField& f, bool inverse) {
  const std::size_t rows = f.rows();
  const std::size_t cols = f.cols();
  const double scale = 1.0 / std::sqrt(static_cast<double>(rows * cols));
  const double sign = ((rows / 2 + cols / 2) % 2 == 0) ? 1.0 : -1.0;

  std::vector<cplx> buffer(f.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double s = ((r + c) % 2 == 0) ? 1.0 : -1.0;
      buffer[r * cols + c] = f(r, c) * s;
    }
  }
  detail::dft2(rows, cols, buffer.data(), f.data(), inverse);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double s = ((r + c) % 2 == 0) ? sign : -sign;
      f(r, c) *= s * scale;
    }
  }
}

}  // namespace

void fft2_unitary_inplace(ComplexField& f) { centered_transform(f, false); }
void ifft2_unitary_inplace(ComplexField& f) { centered_transform(f, true); }

ComplexField fft2_unitary(const ComplexField& f) {
  require_finite(f.values(), "fft2_unitary");
  ComplexField out = f;
  centered_transform(out, false);
  return out;
}

ComplexField ifft2_unitary(const ComplexField& f) {
  require_finite(f.values(), "ifft2_unitary");
  ComplexField out = f;
  centered_transform(out, true);
  return out;
}

double energy(std::span<const cplx> values) {
  double sum = 0.0;
  for (const auto& v : values) sum += std::norm(v);
  return sum;
}

double energy(const ComplexField& f) { return energy(f.values()); }

cplx inner(std::span<const cplx> a, std::span<const cplx> b) {
  if (a.size() != b.size()) throw Error(ErrorKind::ShapeMismatch, "inner: size mismatch");
  cplx sum{};
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * std::conj(b[i]);
  return sum;
}

ComplexField circshift(const ComplexField& f, long dy, long dx) {
  ComplexField out(f.rows(), f.cols(), f.pitch());
  const long rows = static_cast<long>(f.rows());
  const long cols = static_cast<long>(f.cols());
  for (long r = 0; r < rows; ++r) {
    const long rr = ((r + dy) % rows + rows) % rows;
    for (long c = 0; c < cols; ++c) {
      const long cc = ((c + dx) % cols + cols) % cols;
      out(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc)) =
          f(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
    }
  }
  return out;
}

PixelShift shift_register(const ComplexField& a, const ComplexField& b) {
  if (!a.same_shape(b)) throw Error(ErrorKind::ShapeMismatch, "shift_register: shapes differ");
  require_finite(a.values(), "shift_register");
  require_finite(b.values(), "shift_register");
  if (energy(a) == 0.0 || energy(b) == 0.0) {
    throw Error(ErrorKind::ZeroEnergy, "shift_register: correlation undefined for zero-energy input");
  }
  const std::size_t rows = a.rows();
  const std::size_t cols = a.cols();
  const Array2D<cplx> corr = cross_correlation(a, b);

  // Scan in signed lexicographic order so the first maximum wins ties; values
  // within FFT rounding of the running best count as ties.
  const long hr = static_cast<long>(rows / 2);
  const long hc = static_cast<long>(cols / 2);
  PixelShift best;
  double best_value = -1.0;
  for (long dy = -hr; dy < hr; ++dy) {
    const std::size_t r = static_cast<std::size_t>((dy + static_cast<long>(rows)) % static_cast<long>(rows));
    for (long dx = -hc; dx < hc; ++dx) {
      const std::size_t c = static_cast<std::size_t>((dx + static_cast<long>(cols)) % static_cast<long>(cols));
      const double value = std::abs(corr[r * cols + c]);
      if (value > best_value * (1.0 + 1e-12)) {
        best_value = value;
        best = {dy, dx};
      }
    }
  }
  return best;
}

Array2D<cplx> cross_correlation(const ComplexField& a, const ComplexField& b) {
  if (!a.same_shape(b)) throw Error(ErrorKind::ShapeMismatch, "cross_correlation: shapes differ");
  const std::size_t rows = a.rows();
  const std::size_t cols = a.cols();
  std::vector<cplx> fa(a.size());
  std::vector<cplx> fb(b.size());
  detail::dft2(rows, cols, a.data(), fa.data(), false);
  detail::dft2(rows, cols, b.data(), fb.data(), false);
  const double scale = 1.0 / static_cast<double>(a.size());
  for (std::size_t i = 0; i < fa.size(); ++i) fb[i] *= std::conj(fa[i]) * scale;
  Array2D<cplx> corr(rows, cols);
  detail::dft2(rows, cols, fb.data(), corr.data(), true);
  return corr;
}

}  // namespace ptycho
