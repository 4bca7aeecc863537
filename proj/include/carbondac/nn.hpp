#ifndef CARBONDAC_NN_HPP_
#define CARBONDAC_NN_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "carbondac/rng.hpp"

namespace carbondac::nn {

// Fully connected network with tanh hidden layers and a linear output.
// Parameters live in a caller-owned flat buffer: for each layer, the
// weight matrix (out x in, row-major) followed by the bias.
class MlpShape {
 public:
  MlpShape() = default;
  explicit MlpShape(std::vector<int> sizes);

  const std::vector<int>& sizes() const { return sizes_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  std::size_t layers() const { return sizes_.size() - 1; }
  std::size_t parameter_count() const { return total_; }
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] + static_cast<std::size_t>(sizes_[layer]) * sizes_[layer + 1];
  }

 private:
  std::vector<int> sizes_;
  std::vector<std::size_t> offsets_;
  std::size_t total_ = 0;
};

// Activations of one forward pass, kept for backpropagation.
struct MlpCache {
  std::vector<std::vector<double>> activations;  // input, hidden..., output
};

void forward(const MlpShape& shape, std::span<const double> params, std::span<const double> input, MlpCache& cache);

// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(output).
void backward(const MlpShape& shape, std::span<const double> params, const MlpCache& cache,
              std::span<const double> grad_output, std::span<double> grad);

// Orthogonal weights scaled by `hidden_gain` (hidden layers) and
// `output_gain` (last layer); zero biases.
void orthogonal_init(const MlpShape& shape, std::span<double> params, double hidden_gain, double output_gain, Rng& rng);

// Adam with bias correction.
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t size, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-5)
      : beta1_(beta1), beta2_(beta2), eps_(eps), m_(size, 0.0), v_(size, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad, double learning_rate);

 private:
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-5;
  long step_count_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

// Scales `grad` so that its L2 norm is at most `max_norm`. Returns the
// norm before clipping.
double clip_grad_norm(std::span<double> grad, double max_norm);

}  // namespace carbondac::nn

#endif  // CARBONDAC_NN_HPP_
