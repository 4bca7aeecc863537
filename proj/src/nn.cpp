#include "carbondac/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace carbondac::nn {

MlpShape::MlpShape(std::vector<int> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2) throw std::invalid_argument("an MLP needs at least an input and an output layer");
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(offset);
    offset += static_cast<std::size_t>(sizes_[l]) * sizes_[l + 1] + sizes_[l + 1];
  }
  total_ = offset;
}

void forward(const MlpShape& shape, std::span<const double> params, std::span<const double> input, MlpCache& cache) {
  const auto& sizes = shape.sizes();
  cache.activations.resize(sizes.size());
  cache.activations[0].assign(input.begin(), input.end());
  for (std::size_t l = 0; l < shape.layers(); ++l) {
    const int in = sizes[l];
    const int out = sizes[l + 1];
    const double* w = params.data() + shape.weight_offset(l);
    const double* b = params.data() + shape.bias_offset(l);
    const auto& x = cache.activations[l];
    auto& y = cache.activations[l + 1];
    y.resize(static_cast<std::size_t>(out));
    const bool last = l + 1 == shape.layers();
    for (int o = 0; o < out; ++o) {
      double acc = b[o];
      const double* row = w + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) acc += row[i] * x[i];
      y[o] = last ? acc : std::tanh(acc);
    }
  }
}

void backward(const MlpShape& shape, std::span<const double> params, const MlpCache& cache,
              std::span<const double> grad_output, std::span<double> grad) {
  const auto& sizes = shape.sizes();
  std::vector<double> delta(grad_output.begin(), grad_output.end());
  std::vector<double> prev;
  for (std::size_t l = shape.layers(); l-- > 0;) {
    const int in = sizes[l];
    const int out = sizes[l + 1];
    const double* w = params.data() + shape.weight_offset(l);
    double* gw = grad.data() + shape.weight_offset(l);
    double* gb = grad.data() + shape.bias_offset(l);
    const auto& x = cache.activations[l];
    if (l + 1 != shape.layers()) {
      // d tanh(z) / dz = 1 - tanh(z)^2
      const auto& y = cache.activations[l + 1];
      for (int o = 0; o < out; ++o) delta[o] *= 1.0 - y[o] * y[o];
    }
    prev.assign(static_cast<std::size_t>(in), 0.0);
    for (int o = 0; o < out; ++o) {
      const double d = delta[o];
      gb[o] += d;
      double* grow = gw + static_cast<std::size_t>(o) * in;
      const double* row = w + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) {
        grow[i] += d * x[i];
        prev[i] += d * row[i];
      }
    }
    delta.swap(prev);
  }
}

void orthogonal_init(const MlpShape& shape, std::span<double> params, double hidden_gain, double output_gain, Rng& rng) {
  const auto& sizes = shape.sizes();
  for (std::size_t l = 0; l < shape.layers(); ++l) {
    const int in = sizes[l];
    const int out = sizes[l + 1];
    const double gain = l + 1 == shape.layers() ? output_gain : hidden_gain;
    // Orthonormalize along the shorter dimension with modified Gram-Schmidt.
    const bool by_rows = out <= in;
    const int count = by_rows ? out : in;
    const int length = by_rows ? in : out;
    std::vector<std::vector<double>> vecs(static_cast<std::size_t>(count), std::vector<double>(length));
    for (int k = 0; k < count; ++k) {
      for (;;) {
        for (auto& v : vecs[k]) v = rng.normal();
        for (int q = 0; q < k; ++q) {
          double dot = 0.0;
          for (int i = 0; i < length; ++i) dot += vecs[k][i] * vecs[q][i];
          for (int i = 0; i < length; ++i) vecs[k][i] -= dot * vecs[q][i];
        }
        double norm = 0.0;
        for (double v : vecs[k]) norm += v * v;
        norm = std::sqrt(norm);
        if (norm > 1e-8) {
          for (auto& v : vecs[k]) v /= norm;
          break;
        }
      }
    }
    double* w = params.data() + shape.weight_offset(l);
    for (int o = 0; o < out; ++o) {
      for (int i = 0; i < in; ++i) {
        const double v = by_rows ? vecs[o][i] : vecs[i][o];
        w[static_cast<std::size_t>(o) * in + i] = gain * v;
      }
    }
    double* b = params.data() + shape.bias_offset(l);
    for (int o = 0; o < out; ++o) b[o] = 0.0;
  }
}

void Adam::step(std::span<double> params, std::span<const double> grad, double learning_rate) {
  ++step_count_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    const double m_hat = m_[i] / c1;
    const double v_hat = v_[i] / c2;
    params[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + eps_);
  }
}

double clip_grad_norm(std::span<double> grad, double max_norm) {
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / (norm + 1e-6);
    for (auto& g : grad) g *= scale;
  }
  return norm;
}

}  // namespace carbondac::nn
