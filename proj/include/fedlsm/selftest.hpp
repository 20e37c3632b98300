#pragma once

#include <cstdint>

namespace fedlsm {

struct GradcheckSummary {
  int nets = 0;
  double max_identified = 0.0; // worst relative error for each loss component
  double max_unknown = 0.0;
  double max_ude = 0.0;

  double worst() const;
};

// Random small nets (input and hidden widths <= 8, M <= 5, batch <= 4),
// alternating single- and multi-label tasks, checking all three local losses
// against central differences.
GradcheckSummary gradcheck_suite(int nets, std::uint64_t seed, double eps = 1e-5);

} // namespace fedlsm
