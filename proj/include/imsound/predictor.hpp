#pragma once

#include "imsound/core.hpp"

#include <optional>

namespace imsound {

/// Category label; std::nullopt selects the unconditional estimate.
using Category = std::optional<int>;

/// Common interface of the analytic and trained noise predictors. Inputs and
/// outputs live in model space.
class NoisePredictor {
 public:
  virtual ~NoisePredictor() = default;

  virtual Canvas predict(const Canvas& x_t, Category category, int t) const = 0;
};

}  // namespace imsound
