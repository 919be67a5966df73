#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "ptycho/model.hpp"

namespace ptycho {

/// Operations that appear in the ptychographic forward graph.
enum class OpKind {
  Parameter,         // leaf: object or probe
  ExtractWindow,     // y = O[window at position]
  Multiply,          // y = a * b (elementwise)
  FFT,               // y = fft2_unitary(x)
  IFFT,              // y = ifft2_unitary(x)
  TransferMultiply,  // y = H(z) * x, H = exp(i z kappa)
  AbsSquare,         // I = |x|^2
  MseReduce,         // s = sum (I - I_meas)^2 over one frame
};

/// One recorded operation. Only the forward values an adjoint rule reads are
/// cached; everything else is dropped as soon as its consumer has run.
struct Node {
  OpKind kind = OpKind::Parameter;
  int input0 = -1;
  int input1 = -1;
  std::optional<ComplexField> value;   // complex output
  std::optional<RealArray> intensity;  // AbsSquare output
  double scalar = 0.0;                 // MseReduce output (unnormalized frame sum)
  std::size_t position = 0;            // dataset position index (ExtractWindow, MseReduce)
};

/// Topologically ordered record of one forward evaluation of the loss.
///
/// Nodes 0 and 1 are the object and probe leaves; each recorded position then
/// owns a contiguous segment ending in its MseReduce node. The tape keeps a
/// pointer to the dataset it was recorded against, which must outlive it.
struct Recording;

class Tape {
 public:
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  double loss() const noexcept { return loss_; }
  std::size_t segment_count() const noexcept { return segments_.size(); }
  bool records_z_gradient() const noexcept { return z_gradient_; }

  /// Recomputes the loss from the cached leaf values.
  double replay() const;

  /// Drops every cached forward value (backward then fails).
  void clear_caches();

 private:
  friend struct TapeAccess;
  friend Recording forward_record(const ReconstructionState&, const PtychoDataset&, std::span<const std::size_t>,
                                  bool);

  std::vector<Node> nodes_;
  std::vector<std::pair<int, int>> segments_;  // [begin, end) node ranges
  const PtychoDataset* dataset_ = nullptr;
  PropagatorKind kind_ = PropagatorKind::AngularSpectrum;
  ComplexField transfer_;
  ComplexField kappa_;
  double normalization_ = 0.0;  // 1 / (positions * N^2)
  bool z_gradient_ = false;
  double loss_ = 0.0;
};

/// Conjugate cotangents dL/dO*, dL/dP* and the ordinary derivative dL/dz.
struct WirtingerGrad {
  ComplexField object;
  ComplexField probe;
  double z = 0.0;
};

struct Recording {
  double loss = 0.0;
  Tape tape;
};

/// Evaluates the mean squared intensity error over `subset` (dataset position
/// indices) while recording the graph. An empty subset means all positions.
Recording forward_record(const ReconstructionState& state, const PtychoDataset& dataset,
                         std::span<const std::size_t> subset = {}, bool record_z_gradient = false);

/// Reverse sweep over the tape. Per-position contributions are reduced in
/// recorded order so results do not depend on the worker count.
WirtingerGrad backward(const Tape& tape);

}  // namespace ptycho
