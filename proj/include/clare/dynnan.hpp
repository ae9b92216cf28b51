#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "clare/embedstore.hpp"
#include "clare/random.hpp"

namespace clare {

inline constexpr std::size_t kHiddenWidth = 1024;

template <typename Real>
struct DenseLayer {
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  std::vector<Real> weight;  // outputs x inputs, row-major
  std::vector<Real> bias;    // outputs

  static DenseLayer zeros(std::size_t inputs, std::size_t outputs) {
    return {inputs, outputs, std::vector<Real>(inputs * outputs), std::vector<Real>(outputs)};
  }
};

// Parameters and gradients share this shape: input -> hidden -> hidden -> classes.
template <typename Real>
using LayerStack = std::array<DenseLayer<Real>, 3>;

/// Soft target: weight `lambda` on column `first`, 1 - lambda on `second`.
/// A hard label y is {y, y, 1}.
struct MixedTarget {
  std::size_t first = 0;
  std::size_t second = 0;
  double lambda = 1.0;
};

template <typename Real>
struct ForwardPass {
  std::size_t rows = 0;
  std::vector<Real> input;    // rows x input_dim
  std::vector<Real> hidden1;  // post-ReLU
  std::vector<Real> hidden2;  // post-ReLU
  std::vector<Real> logits;   // rows x num_classes, ordered by class_map
};

template <typename Real>
struct LossAndGrad {
  double loss = 0.0;
  LayerStack<Real> grad;
};

/// Three dense layers with ReLU after the first two. The output layer holds
/// one row per class seen so far; `class_map()[c]` is the global class id
/// of output column c. Instantiated for float (training) and double
/// (gradient verification).
template <typename Real>
class BasicDynNan {
 public:
  BasicDynNan(LayerStack<Real> layers, std::vector<ClassId> class_map);

  // Weights ~ U[-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero. Draw order:
  // layer 1, 2, 3, each row-major.
  static BasicDynNan init(std::size_t input_dim, std::vector<ClassId> classes,
                          std::uint64_t seed, std::size_t hidden = kHiddenWidth);

  // Appends one output row per new class, drawn like init() from `seed`.
  // Existing parameters are left bit-for-bit untouched.
  void expand(std::span<const ClassId> new_classes, std::uint64_t seed);

  ForwardPass<Real> forward(std::span<const Real> batch, std::size_t rows) const;

  // Mean cross-entropy over the batch plus weight_decay * 0.5 * ||W||^2
  // (weight matrices only), with the matching gradient.
  LossAndGrad<Real> loss_and_grad(const ForwardPass<Real>& pass,
                                  std::span<const MixedTarget> targets,
                                  double weight_decay) const;

  ClassId predict(std::span<const Real> x) const;
  std::vector<ClassId> predict_batch(std::span<const Real> batch, std::size_t rows) const;

  // Column of each label; LabelError if a label has no head.
  std::vector<std::size_t> columns_of(std::span<const ClassId> labels) const;

  std::size_t input_dim() const { return layers_[0].inputs; }
  std::size_t hidden_width() const { return layers_[0].outputs; }
  std::size_t num_classes() const { return class_map_.size(); }
  std::size_t parameter_count() const;
  const std::vector<ClassId>& class_map() const { return class_map_; }

  const LayerStack<Real>& layers() const { return layers_; }
  LayerStack<Real>& layers() { return layers_; }

 private:
  LayerStack<Real> layers_;
  std::vector<ClassId> class_map_;
};

using DynNanModel = BasicDynNan<float>;

// Index of the largest value; ties go to the lowest index.
template <typename Real>
std::size_t argmax(std::span<const Real> values);

// Row-wise softmax of a logits block (max-subtracted).
template <typename Real>
std::vector<Real> softmax_rows(std::span<const Real> logits, std::size_t rows);

template <typename Real>
struct MixedBatch {
  std::vector<Real> features;
  std::vector<MixedTarget> targets;
};

/// Feature-space mixing. With probability `prob` the whole batch is mixed:
/// lambda ~ Beta(strength, strength), partner = seeded permutation,
/// x' = lambda * x_a + (1 - lambda) * x_b. Otherwise the batch passes
/// through with lambda = 1. Batches of one row are never mixed.
template <typename Real>
MixedBatch<Real> mix_batch(std::span<const Real> batch, std::size_t rows,
                           std::span<const std::size_t> targets, double prob, double strength,
                           Rng& rng);

// Snapshot codec "CLDN" v1, little-endian: magic, u32 version, u32 input
// dim, u32 hidden width, u32 classes, classes x u16 class id, then for each
// layer the f32 weight block followed by the f32 bias block.
void write_model(const DynNanModel& model, std::ostream& sink);
DynNanModel read_model(std::istream& source);
void save_model(const DynNanModel& model, const std::filesystem::path& path);
DynNanModel load_model(const std::filesystem::path& path);

}  // namespace clare
