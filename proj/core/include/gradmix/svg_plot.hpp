#pragma once

#include <map>
#include <string>
#include <vector>

#include "gradmix/analysis.hpp"

namespace gradmix {

/// Average-accuracy evolution: one polyline of A_k against k per method.
/// The exact values are embedded in a data-values attribute so downstream
/// consumers never re-derive them from pixel coordinates. Output bytes are
/// deterministic given inputs.
std::string accuracy_plot_svg(const std::map<std::string, std::vector<double>>& a_k_by_method);

/// Learning-curve evolution: Z_b against minibatch index b per method.
std::string lca_plot_svg(const std::map<std::string, std::vector<double>>& z_b_by_method);

/// Bar chart of the log10(k2) histogram, underflow/overflow bins included.
std::string k2_hist_svg(const K2Histogram& hist);

}  // namespace gradmix
