#pragma once

#include <string>

#include "lqdg/errors.hpp"
#include "lqdg/game_model.hpp"

namespace lqdg {

/// sum_i ||K^i - K^i_ref||_F / ||K^i_ref||_F.
inline double normalized_error(const PolicySet& pol, const PolicySet& reference) {
  if (pol.size() != reference.size()) {
    throw ArgumentError("normalized_error: player counts differ");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < pol.size(); ++i) {
    if (pol[i].rows() != reference[i].rows() ||
        pol[i].cols() != reference[i].cols()) {
      throw ArgumentError("normalized_error: gain " + std::to_string(i) +
                          " shape mismatch");
    }
    const double scale = reference[i].norm();
    if (!(scale > 0.0)) {
      throw ArgumentError("normalized_error: reference gain " +
                          std::to_string(i) + " has zero norm");
    }
    total += (pol[i] - reference[i]).norm() / scale;
  }
  return total;
}

/// sum_i ||K^i - L^i||_F.
inline double policy_distance(const PolicySet& a, const PolicySet& b) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += (a[i] - b[i]).norm();
  return total;
}

}  // namespace lqdg
