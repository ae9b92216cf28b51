#include "clare/dynnan.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <string>
#include <unordered_map>

#include "clare/binary_io.hpp"
#include "clare/errors.hpp"
#include "clare/kernels.hpp"

namespace clare {

namespace {

template <typename Real>
void fill_uniform(std::span<Real> values, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : values) v = static_cast<Real>(-bound + 2.0 * bound * rng.uniform());
}

template <typename Real>
bool all_finite(std::span<const Real> values) {
  return std::all_of(values.begin(), values.end(), [](Real v) { return std::isfinite(v); });
}

}  // namespace

template <typename Real>
BasicDynNan<Real>::BasicDynNan(LayerStack<Real> layers, std::vector<ClassId> class_map)
    : layers_(std::move(layers)), class_map_(std::move(class_map)) {
  for (const auto& l : layers_) {
    if (l.weight.size() != l.inputs * l.outputs || l.bias.size() != l.outputs) {
      throw ShapeError("layer buffers do not match their dimensions");
    }
    if (!all_finite<Real>(l.weight) || !all_finite<Real>(l.bias)) {
      throw DataError("non-finite model parameter");
    }
  }
  if (layers_[1].inputs != layers_[0].outputs || layers_[2].inputs != layers_[1].outputs) {
    throw ShapeError("layer widths do not chain");
  }
  if (layers_[2].outputs != class_map_.size()) {
    throw ShapeError("output width does not match the class map");
  }
  auto sorted = class_map_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ExpansionError("duplicate class in class map");
  }
}

template <typename Real>
BasicDynNan<Real> BasicDynNan<Real>::init(std::size_t input_dim, std::vector<ClassId> classes,
                                          std::uint64_t seed, std::size_t hidden) {
  if (input_dim == 0 || hidden == 0) throw ShapeError("layer widths must be positive");
  if (classes.empty()) throw ConfigError("model needs at least one class");
  Rng rng(seed);
  LayerStack<Real> layers{DenseLayer<Real>::zeros(input_dim, hidden),
                          DenseLayer<Real>::zeros(hidden, hidden),
                          DenseLayer<Real>::zeros(hidden, classes.size())};
  for (auto& l : layers) fill_uniform<Real>(l.weight, l.inputs, rng);
  return BasicDynNan(std::move(layers), std::move(classes));
}

template <typename Real>
void BasicDynNan<Real>::expand(std::span<const ClassId> new_classes, std::uint64_t seed) {
  if (new_classes.empty()) return;
  std::vector<ClassId> combined = class_map_;
  combined.insert(combined.end(), new_classes.begin(), new_classes.end());
  auto sorted = combined;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ExpansionError("expansion repeats an existing or duplicate class");
  }
  auto& head = layers_[2];
  const std::size_t old_size = head.weight.size();
  head.weight.resize(old_size + new_classes.size() * head.inputs);
  head.bias.resize(head.outputs + new_classes.size(), Real{0});
  Rng rng(seed);
  fill_uniform<Real>(std::span(head.weight).subspan(old_size), head.inputs, rng);
  head.outputs += new_classes.size();
  class_map_ = std::move(combined);
}

template <typename Real>
ForwardPass<Real> BasicDynNan<Real>::forward(std::span<const Real> batch,
                                             std::size_t rows) const {
  if (batch.size() != rows * input_dim()) {
    throw ShapeError("batch has " + std::to_string(batch.size()) + " values, expected " +
                     std::to_string(rows) + " x " + std::to_string(input_dim()));
  }
  ForwardPass<Real> pass;
  pass.rows = rows;
  pass.input.assign(batch.begin(), batch.end());
  pass.hidden1.resize(rows * layers_[0].outputs);
  pass.hidden2.resize(rows * layers_[1].outputs);
  pass.logits.resize(rows * layers_[2].outputs);
  const auto& [l1, l2, l3] = layers_;
  kernels::affine_forward<Real>(pass.input, rows, l1.weight, l1.bias, pass.hidden1);
  kernels::relu_inplace<Real>(pass.hidden1);
  kernels::affine_forward<Real>(pass.hidden1, rows, l2.weight, l2.bias, pass.hidden2);
  kernels::relu_inplace<Real>(pass.hidden2);
  kernels::affine_forward<Real>(pass.hidden2, rows, l3.weight, l3.bias, pass.logits);
  return pass;
}

template <typename Real>
LossAndGrad<Real> BasicDynNan<Real>::loss_and_grad(const ForwardPass<Real>& pass,
                                                   std::span<const MixedTarget> targets,
                                                   double weight_decay) const {
  const std::size_t rows = pass.rows;
  const std::size_t classes = num_classes();
  if (targets.size() != rows) throw ShapeError("one target per row required");
  if (pass.logits.size() != rows * classes) throw ShapeError("forward pass does not match model");

  LossAndGrad<Real> out;
  std::vector<Real> grad_logits(rows * classes);
  double total = 0.0;
  const double inv_rows = rows > 0 ? 1.0 / static_cast<double>(rows) : 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& t = targets[r];
    if (t.first >= classes || t.second >= classes) {
      throw LabelError("target column out of range for a " + std::to_string(classes) +
                       "-class model");
    }
    if (!(t.lambda >= 0.0 && t.lambda <= 1.0)) throw LabelError("mixing weight outside [0, 1]");
    const Real* z = pass.logits.data() + r * classes;
    double zmax = z[0];
    for (std::size_t c = 1; c < classes; ++c) zmax = std::max(zmax, static_cast<double>(z[c]));
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) sum += std::exp(static_cast<double>(z[c]) - zmax);
    const double lse = zmax + std::log(sum);
    total += t.lambda * (lse - z[t.first]) + (1.0 - t.lambda) * (lse - z[t.second]);
    Real* g = grad_logits.data() + r * classes;
    for (std::size_t c = 0; c < classes; ++c) {
      double p = std::exp(static_cast<double>(z[c]) - lse);
      if (c == t.first) p -= t.lambda;
      if (c == t.second) p -= 1.0 - t.lambda;
      g[c] = static_cast<Real>(p * inv_rows);
    }
  }
  out.loss = total * inv_rows;

  const auto& [l1, l2, l3] = layers_;
  for (std::size_t i = 0; i < 3; ++i) {
    out.grad[i] = DenseLayer<Real>::zeros(layers_[i].inputs, layers_[i].outputs);
  }
  kernels::affine_backward_params<Real>(grad_logits, pass.hidden2, rows, out.grad[2].weight,
                                        out.grad[2].bias);
  std::vector<Real> grad_h2(rows * l2.outputs);
  kernels::affine_backward_input<Real>(grad_logits, rows, l3.weight, grad_h2);
  kernels::relu_backward_inplace<Real>(pass.hidden2, grad_h2);
  kernels::affine_backward_params<Real>(grad_h2, pass.hidden1, rows, out.grad[1].weight,
                                        out.grad[1].bias);
  std::vector<Real> grad_h1(rows * l1.outputs);
  kernels::affine_backward_input<Real>(grad_h2, rows, l2.weight, grad_h1);
  kernels::relu_backward_inplace<Real>(pass.hidden1, grad_h1);
  kernels::affine_backward_params<Real>(grad_h1, pass.input, rows, out.grad[0].weight,
                                        out.grad[0].bias);

  if (weight_decay != 0.0) {
    double norm2 = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      const auto& w = layers_[i].weight;
      auto& g = out.grad[i].weight;
      const auto wd = static_cast<Real>(weight_decay);
      for (std::size_t j = 0; j < w.size(); ++j) {
        norm2 += static_cast<double>(w[j]) * static_cast<double>(w[j]);
        g[j] += wd * w[j];
      }
    }
    out.loss += 0.5 * weight_decay * norm2;
  }
  return out;
}

template <typename Real>
ClassId BasicDynNan<Real>::predict(std::span<const Real> x) const {
  return predict_batch(x, 1).front();
}

template <typename Real>
std::vector<ClassId> BasicDynNan<Real>::predict_batch(std::span<const Real> batch,
                                                      std::size_t rows) const {
  const auto pass = forward(batch, rows);
  const std::size_t classes = num_classes();
  std::vector<ClassId> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    out[r] = class_map_[argmax<Real>(std::span(pass.logits).subspan(r * classes, classes))];
  }
  return out;
}

template <typename Real>
std::vector<std::size_t> BasicDynNan<Real>::columns_of(std::span<const ClassId> labels) const {
  std::unordered_map<ClassId, std::size_t> column;
  for (std::size_t c = 0; c < class_map_.size(); ++c) column.emplace(class_map_[c], c);
  std::vector<std::size_t> out;
  out.reserve(labels.size());
  for (const auto y : labels) {
    const auto it = column.find(y);
    if (it == column.end()) {
      throw LabelError("class " + std::to_string(y) + " has no output head");
    }
    out.push_back(it->second);
  }
  return out;
}

template <typename Real>
std::size_t BasicDynNan<Real>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

template <typename Real>
std::size_t argmax(std::span<const Real> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

template <typename Real>
std::vector<Real> softmax_rows(std::span<const Real> logits, std::size_t rows) {
  std::vector<Real> out(logits.size());
  if (rows == 0) return out;
  const std::size_t cols = logits.size() / rows;
  for (std::size_t r = 0; r < rows; ++r) {
    const Real* z = logits.data() + r * cols;
    double zmax = z[0];
    for (std::size_t c = 1; c < cols; ++c) zmax = std::max(zmax, static_cast<double>(z[c]));
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) sum += std::exp(static_cast<double>(z[c]) - zmax);
    for (std::size_t c = 0; c < cols; ++c) {
      out[r * cols + c] = static_cast<Real>(std::exp(static_cast<double>(z[c]) - zmax) / sum);
    }
  }
  return out;
}

template <typename Real>
MixedBatch<Real> mix_batch(std::span<const Real> batch, std::size_t rows,
                           std::span<const std::size_t> targets, double prob, double strength,
                           Rng& rng) {
  if (targets.size() != rows) throw ShapeError("one target per row required");
  MixedBatch<Real> out;
  out.features.assign(batch.begin(), batch.end());
  out.targets.reserve(rows);
  for (const auto y : targets) out.targets.push_back({y, y, 1.0});
  if (rows < 2 || !(rng.uniform() < prob)) return out;

  const double lambda = rng.beta(strength, strength);
  std::vector<std::size_t> partner(rows);
  std::iota(partner.begin(), partner.end(), std::size_t{0});
  rng.shuffle(std::span(partner));
  const std::size_t dim = batch.size() / rows;
  const auto a = static_cast<Real>(lambda);
  const auto b = static_cast<Real>(1.0 - lambda);
  for (std::size_t r = 0; r < rows; ++r) {
    const Real* xa = batch.data() + r * dim;
    const Real* xb = batch.data() + partner[r] * dim;
    Real* dst = out.features.data() + r * dim;
    for (std::size_t d = 0; d < dim; ++d) dst[d] = a * xa[d] + b * xb[d];
    out.targets[r] = {targets[r], targets[partner[r]], lambda};
  }
  return out;
}

template class BasicDynNan<float>;
template class BasicDynNan<double>;
template std::size_t argmax<float>(std::span<const float>);
template std::size_t argmax<double>(std::span<const double>);
template std::vector<float> softmax_rows<float>(std::span<const float>, std::size_t);
template std::vector<double> softmax_rows<double>(std::span<const double>, std::size_t);
template MixedBatch<float> mix_batch<float>(std::span<const float>, std::size_t,
                                            std::span<const std::size_t>, double, double, Rng&);
template MixedBatch<double> mix_batch<double>(std::span<const double>, std::size_t,
                                              std::span<const std::size_t>, double, double, Rng&);

// --- snapshot codec ---

namespace {
constexpr char kModelMagic[4] = {'C', 'L', 'D', 'N'};
constexpr std::uint32_t kModelVersion = 1;
}  // namespace

void write_model(const DynNanModel& model, std::ostream& sink) {
  using namespace binary_io;
  sink.write(kModelMagic, 4);
  put_uint<std::uint32_t>(sink, kModelVersion);
  put_uint<std::uint32_t>(sink, static_cast<std::uint32_t>(model.input_dim()));
  put_uint<std::uint32_t>(sink, static_cast<std::uint32_t>(model.hidden_width()));
  put_uint<std::uint32_t>(sink, static_cast<std::uint32_t>(model.num_classes()));
  for (const auto c : model.class_map()) put_uint<std::uint16_t>(sink, c);
  for (const auto& l : model.layers()) {
    for (const float w : l.weight) put_f32(sink, w);
    for (const float b : l.bias) put_f32(sink, b);
  }
  if (!sink) throw IoError("failed writing model snapshot");
}

DynNanModel read_model(std::istream& source) {
  using namespace binary_io;
  char magic[4];
  if (!source.read(magic, 4) || std::memcmp(magic, kModelMagic, 4) != 0) {
    throw FormatError("not a CLDN model snapshot");
  }
  const auto version = get_uint<std::uint32_t>(source);
  if (version != kModelVersion) {
    throw UnsupportedVersionError("unsupported model version " + std::to_string(version));
  }
  const std::size_t input = get_uint<std::uint32_t>(source);
  const std::size_t hidden = get_uint<std::uint32_t>(source);
  const std::size_t classes = get_uint<std::uint32_t>(source);
  std::vector<ClassId> map;
  for (std::size_t c = 0; c < classes; ++c) map.push_back(get_uint<std::uint16_t>(source));
  LayerStack<float> layers{DenseLayer<float>::zeros(input, hidden),
                           DenseLayer<float>::zeros(hidden, hidden),
                           DenseLayer<float>::zeros(hidden, classes)};
  for (auto& l : layers) {
    for (auto& w : l.weight) w = get_f32(source);
    for (auto& b : l.bias) b = get_f32(source);
  }
  return DynNanModel(std::move(layers), std::move(map));
}

void save_model(const DynNanModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_model(model, out);
}

DynNanModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_model(in);
}

}  // namespace clare
