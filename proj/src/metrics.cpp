#include "ptycho/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "ptycho/error.hpp"

namespace ptycho {

namespace {

template <typename Include>
cplx correlation_over(const ComplexField& truth, const ComplexField& estimate, Include include) {
  if (!truth.same_shape(estimate)) throw Error(ErrorKind::ShapeMismatch, "correlation: shapes differ");
  cplx cross{};
  double et = 0.0;
  double ee = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!include(i)) continue;
    cross += std::conj(truth[i]) * estimate[i];
    et += std::norm(truth[i]);
    ee += std::norm(estimate[i]);
  }
  if (et == 0.0 || ee == 0.0) {
    throw Error(ErrorKind::ZeroEnergy, "correlation undefined for a zero-energy field");
  }
  return cross / (std::sqrt(et) * std::sqrt(ee));
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0.0;
  double mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  // Flat images carry no structure to compare: identical flats agree, otherwise no correlation.
  if (saa == 0.0 || sbb == 0.0) return (saa == 0.0 && sbb == 0.0) ? 1.0 : 0.0;
  return sab / (std::sqrt(saa) * std::sqrt(sbb));
}

}  // namespace

cplx complex_correlation(const ComplexField& truth, const ComplexField& estimate) {
  return correlation_over(truth, estimate, [](std::size_t) { return true; });
}

cplx complex_correlation(const ComplexField& truth, const ComplexField& estimate, const Mask& mask) {
  if (mask.rows() != truth.rows() || mask.cols() != truth.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "correlation: mask shape differs");
  }
  return correlation_over(truth, estimate, [&](std::size_t i) { return mask[i] != 0; });
}

Mask scan_mask(std::size_t rows, std::size_t cols, std::span<const ScanPosition> positions,
               const ComplexField& probe, double threshold) {
  Mask mask(rows, cols, 0);
  double peak = 0.0;
  for (const auto& v : probe) peak = std::max(peak, std::norm(v));
  const std::size_t n = probe.rows();
  for (const auto& pos : positions) {
    require_window_inside(rows, cols, pos, n);
    const auto r0 = static_cast<std::size_t>(pos.pixel.row);
    const auto c0 = static_cast<std::size_t>(pos.pixel.col);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        if (std::norm(probe(r, c)) >= threshold * peak) mask(r0 + r, c0 + c) = 1;
      }
    }
  }
  return mask;
}

CorrelationReport registered_correlation(const ComplexField& truth, const ComplexField& estimate,
                                         std::size_t crop_margin, const Mask* mask,
                                         const RegistrationOptions& options) {
  if (!truth.same_shape(estimate)) throw Error(ErrorKind::ShapeMismatch, "correlation: shapes differ");
  if (mask && (mask->rows() != truth.rows() || mask->cols() != truth.cols())) {
    throw Error(ErrorKind::ShapeMismatch, "correlation: mask shape differs");
  }
  const std::size_t rows = truth.rows();
  const std::size_t cols = truth.cols();
  if (rows < 2 * crop_margin + 16 || cols < 2 * crop_margin + 16) {
    throw Error(ErrorKind::InvalidArgument,
                fmt::format("crop of {}x{} with margin {} is smaller than 16x16", rows, cols, crop_margin));
  }
  const std::size_t crop_rows = (rows - 2 * crop_margin) & ~std::size_t{1};
  const std::size_t crop_cols = (cols - 2 * crop_margin) & ~std::size_t{1};

  // Template: the truth on the (masked) crop, zero elsewhere. Matching it
  // against the full estimate keeps every candidate overlap genuine, unlike
  // correlating two crops circularly.
  ComplexField templ(rows, cols, truth.pitch());
  ComplexField support(rows, cols, truth.pitch());
  for (std::size_t r = crop_margin; r < crop_margin + crop_rows; ++r) {
    for (std::size_t c = crop_margin; c < crop_margin + crop_cols; ++c) {
      if (mask && (*mask)(r, c) == 0) continue;
      templ(r, c) = truth(r, c);
      support(r, c) = 1.0;
    }
  }
  if (energy(templ) == 0.0) throw Error(ErrorKind::ZeroEnergy, "registered correlation: empty truth crop");
  const auto register_shift = [&](const ComplexField& est) {
    ComplexField power(rows, cols, est.pitch());
    for (std::size_t k = 0; k < est.size(); ++k) power[k] = std::norm(est[k]);
    const auto corr = cross_correlation(templ, est);
    const auto local = cross_correlation(support, power);
    double peak_local = 0.0;
    for (const auto& v : local) peak_local = std::max(peak_local, v.real());
    if (!(peak_local > 0.0)) throw Error(ErrorKind::ZeroEnergy, "registered correlation: zero-energy estimate");
    // normalized score |<T, E_d>| / ||E_d|| over the template support; the
    // scan order matches shift_register so exact ties pick the same offset
    PixelShift best;
    double best_score = -1.0;
    const long hr = static_cast<long>(rows / 2);
    const long hc = static_cast<long>(cols / 2);
    for (long dy = -hr; dy < hr; ++dy) {
      const auto r = static_cast<std::size_t>((dy + static_cast<long>(rows)) % static_cast<long>(rows));
      for (long dx = -hc; dx < hc; ++dx) {
        const auto c = static_cast<std::size_t>((dx + static_cast<long>(cols)) % static_cast<long>(cols));
        const double e = local(r, c).real();
        if (e <= 1e-12 * peak_local) continue;
        const double score = std::abs(corr(r, c)) / std::sqrt(e);
        if (score > best_score * (1.0 + 1e-12)) {
          best_score = score;
          best = {dy, dx};
        }
      }
    }
    return best;
  };

  CorrelationReport report;
  ComplexField tc(crop_rows, crop_cols, truth.pitch());
  ComplexField ec(crop_rows, crop_cols, truth.pitch());
  Mask valid(crop_rows, crop_cols, 0);
  // Aligned pairs on the crop grid; `valid` marks pixels that take part.
  auto align = [&](const ComplexField& est, const PixelShift& shift) {
    valid = Mask(crop_rows, crop_cols, 0);
    for (std::size_t r = 0; r < crop_rows; ++r) {
      for (std::size_t c = 0; c < crop_cols; ++c) {
        const std::size_t r0 = r + crop_margin;
        const std::size_t c0 = c + crop_margin;
        tc(r, c) = ec(r, c) = cplx{};
        if (mask && (*mask)(r0, c0) == 0) continue;
        const long rr = static_cast<long>(r0) + shift.dy;
        const long cc = static_cast<long>(c0) + shift.dx;
        if (rr < 0 || cc < 0 || rr >= static_cast<long>(rows) || cc >= static_cast<long>(cols)) continue;
        tc(r, c) = truth(r0, c0);
        ec(r, c) = est(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
        valid(r, c) = 1;
      }
    }
  };

  if (!options.compensate_ramp) {
    report.shift = register_shift(estimate);
    align(estimate, report.shift);
  } else {
    // A ramp biases the shift search and a wrong shift biases the ramp fit,
    // so alternate until the shift settles.
    ComplexField work = estimate;
    for (int pass = 0; pass < 4; ++pass) {
      const PixelShift shift = register_shift(work);
      if (pass > 0 && shift == report.shift) break;
      report.shift = shift;
      align(work, shift);
      // Amplitude-weighted mean phase gradient of O_hat * conj(O) between neighbors.
      cplx sy{};
      cplx sx{};
      auto diff = [&](std::size_t r, std::size_t c) { return ec(r, c) * std::conj(tc(r, c)); };
      for (std::size_t r = 0; r < crop_rows; ++r) {
        for (std::size_t c = 0; c < crop_cols; ++c) {
          if (!valid(r, c)) continue;
          if (r > 0 && valid(r - 1, c)) sy += diff(r, c) * std::conj(diff(r - 1, c));
          if (c > 0 && valid(r, c - 1)) sx += diff(r, c) * std::conj(diff(r, c - 1));
        }
      }
      const double ky = sy == cplx{} ? 0.0 : std::arg(sy);
      const double kx = sx == cplx{} ? 0.0 : std::arg(sx);
      report.ramp.ky += ky;
      report.ramp.kx += kx;
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
          work(r, c) *= std::polar(1.0, -(ky * static_cast<double>(r) + kx * static_cast<double>(c)));
        }
      }
    }
    align(work, report.shift);
  }

  std::vector<cplx> t;
  std::vector<cplx> e;
  for (std::size_t k = 0; k < valid.size(); ++k) {
    if (!valid[k]) continue;
    t.push_back(tc[k]);
    e.push_back(ec[k]);
  }
  if (t.empty()) throw Error(ErrorKind::ZeroEnergy, "registered correlation: empty overlap");

  double et = 0.0;
  double ee = 0.0;
  cplx cross{};
  cplx phase_cross{};
  std::vector<double> at(t.size());
  std::vector<double> ae(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    cross += std::conj(t[i]) * e[i];
    et += std::norm(t[i]);
    ee += std::norm(e[i]);
    phase_cross += std::conj(std::polar(1.0, std::arg(t[i]))) * std::polar(1.0, std::arg(e[i]));
    at[i] = std::abs(t[i]);
    ae[i] = std::abs(e[i]);
  }
  if (et == 0.0 || ee == 0.0) throw Error(ErrorKind::ZeroEnergy, "correlation undefined for zero energy");
  report.c = cross / (std::sqrt(et) * std::sqrt(ee));
  report.abs = std::abs(report.c);
  report.arg = std::arg(report.c);
  report.amplitude = pearson(at, ae);
  report.phase = std::abs(phase_cross) / static_cast<double>(t.size());
  return report;
}

}  // namespace ptycho
