#include "gradmix/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gradmix {

K2Histogram k2_histogram(const std::vector<std::vector<TraceRow>>& traces, int bins) {
    if (bins < 1) throw std::invalid_argument("bins must be >= 1");
    bool any_rows = false;
    std::vector<double> logs;
    K2Histogram hist;
    long below_one = 0;
    for (const auto& trace : traces) {
        for (const auto& row : trace) {
            any_rows = true;
            const double k2 = row.k2;
            if (std::isnan(k2)) continue;  // step had no reference batch
            if (k2 == 0.0) {
                ++hist.underflow;
                ++below_one;
            } else if (std::isinf(k2)) {
                ++hist.overflow;
            } else {
                logs.push_back(std::log10(k2));
                if (k2 < 1.0) ++below_one;
            }
            ++hist.total;
        }
    }
    if (!any_rows) throw std::invalid_argument("k2_histogram: traces are empty");
    if (hist.total == 0) throw std::invalid_argument("k2_histogram: traces carry no k2 column data");

    double lo = 0.0, hi = 0.0;
    if (!logs.empty()) {
        lo = *std::min_element(logs.begin(), logs.end());
        hi = *std::max_element(logs.begin(), logs.end());
    }
    if (hi - lo < 1e-12) {
        lo -= 0.5;
        hi += 0.5;
    }
    hist.edges.resize(bins + 1);
    for (int i = 0; i <= bins; ++i) hist.edges[i] = lo + (hi - lo) * i / bins;
    hist.counts.assign(bins, 0);
    for (double v : logs) {
        int idx = static_cast<int>((v - lo) / (hi - lo) * bins);
        idx = std::clamp(idx, 0, bins - 1);
        ++hist.counts[idx];
    }
    hist.fraction_below_one = static_cast<double>(below_one) / static_cast<double>(hist.total);
    return hist;
}

}  // namespace gradmix
