#pragma once

#include <vector>

#include "gradmix/continuum.hpp"

namespace gradmix {

/// Histogram of log10(k2) over every step that had a reference batch.
/// k2 = 0 and k2 = +inf land in the underflow/overflow slots; steps without
/// a defined k2 (no memory yet, VAN, multitask) are not counted at all.
struct K2Histogram {
    std::vector<double> edges;   // bins + 1 ascending edges over log10(k2)
    std::vector<long> counts;    // per-bin counts
    long underflow = 0;          // k2 == 0
    long overflow = 0;           // k2 == +inf
    long total = 0;              // all counted steps
    double fraction_below_one = 0.0;  // strict k2 < 1 among counted steps
};

/// Throws std::invalid_argument when the traces contain no rows at all.
K2Histogram k2_histogram(const std::vector<std::vector<TraceRow>>& traces, int bins);

}  // namespace gradmix
