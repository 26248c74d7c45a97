#pragma once

#include "xatk/model.hpp"
#include "xatk/tensor.hpp"

namespace xatk {

struct SsimConfig {
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;  // unit-interval images
  int window = 8;              // uniform square window side
  int stride = 1;
};

// Structural similarity: the single-window statistic evaluated on every
// uniform window (side cfg.window, stride cfg.stride) of every channel,
// averaged over windows and then channels. When the window exceeds an
// image side the statistic is computed once globally per channel.
// Result lies in [-1, 1]; identical images score exactly 1.
double ssim(const ImageTensor& x, const ImageTensor& y,
            const SsimConfig& cfg = {});

// 100 * sum|z - zhat| / sum|z|. Throws DataError when sum|z| == 0.
double explanation_change_pct(const AttributionMap& z,
                              const AttributionMap& zhat);

// |p[y_star] - phat[y_star]|, in [0, 1].
double prediction_change(const ClassProbs& p, const ClassProbs& phat,
                         int y_star);

}  // namespace xatk
