#include "xatk/model.hpp"

#include <algorithm>
#include <cmath>

namespace xatk {

ClassProbs softmax(const std::vector<double>& logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  ClassProbs p(logits.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    p[j] = std::exp(logits[j] - m);
    sum += p[j];
  }
  for (auto& v : p) v /= sum;
  return p;
}

void ModelBackend::check_input(const ImageTensor& x) const {
  if (x.shape() != input_shape()) {
    throw ShapeError("model input shape mismatch: expected " +
                     input_shape().str() + ", got " + x.shape().str());
  }
}

void ModelBackend::check_class(int j) const {
  if (j < 0 || j >= num_classes()) {
    throw ConfigError("class index " + std::to_string(j) +
                      " out of range [0," + std::to_string(num_classes()) +
                      ")");
  }
}

}  // namespace xatk
