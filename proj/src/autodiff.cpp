#include "ptycho/autodiff.hpp"

#include <fmt/format.h>

#include <cmath>

#include "ptycho/error.hpp"
#include "ptycho/parallel.hpp"

namespace ptycho {

namespace {

constexpr int kObjectNode = 0;
constexpr int kProbeNode = 1;

std::size_t segment_length(PropagatorKind kind) { return kind == PropagatorKind::AngularSpectrum ? 7 : 5; }

[[noreturn]] void missing_cache(int id, OpKind kind) {
  throw Error(ErrorKind::InvalidArgument,
              fmt::format("tape cache missing for node {} (op {})", id, static_cast<int>(kind)));
}

}  // namespace

struct TapeAccess {
  static const std::vector<std::pair<int, int>>& segments(const Tape& tape) { return tape.segments_; }
  static const PtychoDataset& dataset(const Tape& tape) { return *tape.dataset_; }

  // Forward pass for one position. With `nodes` set, fills the segment starting
  // at `begin`; otherwise only returns the frame's squared-error sum. The
  // arithmetic is identical either way so replay reproduces the recorded loss.
  static double run_segment(const Tape& tape, std::vector<Node>* nodes, int begin, std::size_t index,
                            const ComplexField& object, const ComplexField& probe) {
    const PtychoDataset& dataset = *tape.dataset_;
    const ScanPosition& pos = dataset.positions[index];
    const std::size_t n = dataset.geometry.frame_size;
    const bool as = tape.kind_ == PropagatorKind::AngularSpectrum;
    int id = begin;
    auto emit = [&](OpKind kind, int in0, int in1) -> Node* {
      if (!nodes) return nullptr;
      Node& node = (*nodes)[static_cast<std::size_t>(id)];
      node.kind = kind;
      node.input0 = in0;
      node.input1 = in1;
      node.position = index;
      return &node;
    };

    ComplexField work = extract_window(object, pos, n);
    const int window_id = id;
    if (Node* node = emit(OpKind::ExtractWindow, kObjectNode, -1)) node->value = work;
    ++id;

    for (std::size_t k = 0; k < work.size(); ++k) work[k] *= probe[k];
    const int product_id = id;
    emit(OpKind::Multiply, window_id, kProbeNode);
    ++id;

    fft2_unitary_inplace(work);
    const int spectrum_id = id;
    if (Node* node = emit(OpKind::FFT, product_id, -1); node && (!as || tape.z_gradient_)) node->value = work;
    ++id;

    int field_id = spectrum_id;
    if (as) {
      for (std::size_t k = 0; k < work.size(); ++k) work[k] *= tape.transfer_[k];
      emit(OpKind::TransferMultiply, spectrum_id, -1);
      const int filtered_id = id++;
      ifft2_unitary_inplace(work);
      field_id = id;
      if (Node* node = emit(OpKind::IFFT, filtered_id, -1)) node->value = work;
      ++id;
    }

    RealArray intensity(n, n);
    for (std::size_t k = 0; k < work.size(); ++k) intensity[k] = std::norm(work[k]);
    const double sum = frame_squared_error(dataset.frames[index], intensity);
    const int intensity_id = id;
    if (Node* node = emit(OpKind::AbsSquare, field_id, -1)) node->intensity = std::move(intensity);
    ++id;

    if (Node* node = emit(OpKind::MseReduce, intensity_id, -1)) node->scalar = sum;
    return sum;
  }

  struct SegmentGrad {
    ComplexField object_window;
    ComplexField probe;
    double z = 0.0;
  };

  static SegmentGrad backward_segment(const Tape& tape, int begin, int end) {
    const std::vector<Node>& nodes = tape.nodes_;
    const auto count = static_cast<std::size_t>(end - begin);
    std::vector<std::optional<ComplexField>> cot(count);
    std::vector<std::optional<RealArray>> cot_intensity(count);
    auto local = [begin](int id) { return static_cast<std::size_t>(id - begin); };
    auto accumulate = [](std::optional<ComplexField>& slot, ComplexField&& value) {
      if (!slot) {
        slot = std::move(value);
        return;
      }
      for (std::size_t k = 0; k < value.size(); ++k) (*slot)[k] += value[k];
    };

    SegmentGrad out;
    for (int id = end - 1; id >= begin; --id) {
      const Node& node = nodes[static_cast<std::size_t>(id)];
      switch (node.kind) {
        case OpKind::MseReduce: {
          const Node& source = nodes[static_cast<std::size_t>(node.input0)];
          if (!source.intensity) missing_cache(node.input0, source.kind);
          const RealArray& measured = tape.dataset_->frames[node.position];
          RealArray bar(measured.rows(), measured.cols());
          for (std::size_t k = 0; k < bar.size(); ++k) {
            bar[k] = 2.0 * tape.normalization_ * ((*source.intensity)[k] - measured[k]);
          }
          cot_intensity[local(node.input0)] = std::move(bar);
          break;
        }
        case OpKind::AbsSquare: {
          const Node& source = nodes[static_cast<std::size_t>(node.input0)];
          if (!source.value) missing_cache(node.input0, source.kind);
          const RealArray& bar = *cot_intensity[local(id)];
          ComplexField x = *source.value;
          for (std::size_t k = 0; k < x.size(); ++k) x[k] *= bar[k];
          accumulate(cot[local(node.input0)], std::move(x));
          break;
        }
        case OpKind::IFFT: {
          ComplexField bar = std::move(*cot[local(id)]);
          fft2_unitary_inplace(bar);
          accumulate(cot[local(node.input0)], std::move(bar));
          break;
        }
        case OpKind::FFT: {
          ComplexField bar = std::move(*cot[local(id)]);
          ifft2_unitary_inplace(bar);
          accumulate(cot[local(node.input0)], std::move(bar));
          break;
        }
        case OpKind::TransferMultiply: {
          ComplexField bar = std::move(*cot[local(id)]);
          if (tape.z_gradient_) {
            const Node& source = nodes[static_cast<std::size_t>(node.input0)];
            if (!source.value) missing_cache(node.input0, source.kind);
            double gz = 0.0;
            for (std::size_t k = 0; k < bar.size(); ++k) {
              const cplx dy_dz = cplx(0.0, 1.0) * tape.kappa_[k] * tape.transfer_[k] * (*source.value)[k];
              gz += 2.0 * (bar[k] * std::conj(dy_dz)).real();
            }
            out.z += gz;
          }
          for (std::size_t k = 0; k < bar.size(); ++k) bar[k] *= std::conj(tape.transfer_[k]);
          accumulate(cot[local(node.input0)], std::move(bar));
          break;
        }
        case OpKind::Multiply: {
          const ComplexField& bar = *cot[local(id)];
          const Node& a = nodes[static_cast<std::size_t>(node.input0)];
          const Node& b = nodes[static_cast<std::size_t>(node.input1)];
          if (!a.value) missing_cache(node.input0, a.kind);
          if (!b.value) missing_cache(node.input1, b.kind);
          ComplexField abar = bar;
          ComplexField bbar = bar;
          for (std::size_t k = 0; k < bar.size(); ++k) {
            abar[k] *= std::conj((*b.value)[k]);
            bbar[k] *= std::conj((*a.value)[k]);
          }
          accumulate(cot[local(node.input0)], std::move(abar));
          out.probe = std::move(bbar);  // input1 is always the probe leaf
          break;
        }
        case OpKind::ExtractWindow:
          out.object_window = std::move(*cot[local(id)]);
          break;
        case OpKind::Parameter:
          break;
      }
    }
    return out;
  }
};

double Tape::replay() const {
  if (nodes_.size() < 2 || !nodes_[kObjectNode].value || !nodes_[kProbeNode].value) {
    missing_cache(kObjectNode, OpKind::Parameter);
  }
  double sum = 0.0;
  for (const auto& [begin, end] : segments_) {
    const std::size_t index = nodes_[static_cast<std::size_t>(begin)].position;
    sum += TapeAccess::run_segment(*this, nullptr, begin, index, *nodes_[kObjectNode].value,
                                   *nodes_[kProbeNode].value);
  }
  return sum * normalization_;
}

void Tape::clear_caches() {
  for (auto& node : nodes_) {
    node.value.reset();
    node.intensity.reset();
  }
}

Recording forward_record(const ReconstructionState& state, const PtychoDataset& dataset,
                         std::span<const std::size_t> subset, bool record_z_gradient) {
  const PtychoGeometry& g = dataset.geometry;
  const std::size_t n = g.frame_size;
  if (state.probe.rows() != n || state.probe.cols() != n) {
    throw Error(ErrorKind::ShapeMismatch, "probe does not match the frame size");
  }
  if (dataset.frames.size() != dataset.positions.size()) {
    throw Error(ErrorKind::ShapeMismatch, "frame and position counts differ");
  }
  if (record_z_gradient && g.propagator != PropagatorKind::AngularSpectrum) {
    throw Error(ErrorKind::Unsupported, "the Fraunhofer model has no distance dependence to differentiate");
  }
  std::vector<std::size_t> all;
  if (subset.empty()) {
    all.resize(dataset.positions.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    subset = all;
  }

  Recording rec;
  Tape& tape = rec.tape;
  tape.dataset_ = &dataset;
  tape.kind_ = g.propagator;
  tape.z_gradient_ = record_z_gradient;
  tape.normalization_ = 1.0 / (static_cast<double>(subset.size()) * static_cast<double>(n * n));
  if (tape.kind_ == PropagatorKind::AngularSpectrum) {
    const Propagator propagator = make_propagator(g, state.z_estimate);
    tape.transfer_ = propagator.transfer();
    tape.kappa_ = propagator.kappa();
  }

  const std::size_t len = segment_length(tape.kind_);
  tape.nodes_.resize(2 + len * subset.size());
  tape.nodes_[kObjectNode].value = state.object;
  tape.nodes_[kProbeNode].value = state.probe;
  for (std::size_t s = 0; s < subset.size(); ++s) {
    if (subset[s] >= dataset.positions.size()) {
      throw Error(ErrorKind::OutOfBounds, fmt::format("subset index {} out of range", subset[s]));
    }
    const int begin = static_cast<int>(2 + len * s);
    tape.segments_.emplace_back(begin, begin + static_cast<int>(len));
  }

  parallel_for(subset.size(), [&](std::size_t s) {
    TapeAccess::run_segment(tape, &tape.nodes_, tape.segments_[s].first, subset[s], state.object, state.probe);
  });

  double sum = 0.0;
  for (const auto& [begin, end] : tape.segments_) sum += tape.nodes_[static_cast<std::size_t>(end - 1)].scalar;
  tape.loss_ = sum * tape.normalization_;
  rec.loss = tape.loss_;
  return rec;
}

WirtingerGrad backward(const Tape& tape) {
  const auto& nodes = tape.nodes();
  if (nodes.size() < 2 || !nodes[kObjectNode].value || !nodes[kProbeNode].value) {
    missing_cache(kObjectNode, OpKind::Parameter);
  }
  const ComplexField& object = *nodes[kObjectNode].value;
  const ComplexField& probe = *nodes[kProbeNode].value;

  const auto& segments = TapeAccess::segments(tape);
  std::vector<TapeAccess::SegmentGrad> parts(segments.size());
  parallel_for(segments.size(), [&](std::size_t s) {
    parts[s] = TapeAccess::backward_segment(tape, segments[s].first, segments[s].second);
  });

  WirtingerGrad grad{ComplexField(object.rows(), object.cols(), object.pitch()),
                     ComplexField(probe.rows(), probe.cols(), probe.pitch()), 0.0};
  const auto& positions = TapeAccess::dataset(tape).positions;
  for (std::size_t s = 0; s < parts.size(); ++s) {
    const std::size_t index = nodes[static_cast<std::size_t>(segments[s].first)].position;
    embed_add(grad.object, parts[s].object_window, positions[index]);
    for (std::size_t k = 0; k < grad.probe.size(); ++k) grad.probe[k] += parts[s].probe[k];
    grad.z += parts[s].z;
  }
  return grad;
}

}  // namespace ptycho
