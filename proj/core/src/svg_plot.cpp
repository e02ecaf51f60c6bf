#include "gradmix/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gradmix/text_io.hpp"

namespace gradmix {

namespace {

constexpr int kWidth = 640;
constexpr int kHeight = 400;
constexpr int kMarginLeft = 56;
constexpr int kMarginRight = 16;
constexpr int kMarginTop = 24;
constexpr int kMarginBottom = 44;

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                          "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
constexpr int kPaletteSize = 8;

double x_px(double frac) { return kMarginLeft + frac * (kWidth - kMarginLeft - kMarginRight); }
double y_px(double frac) { return kHeight - kMarginBottom - frac * (kHeight - kMarginTop - kMarginBottom); }

std::string px(double v) {
    // one decimal is plenty for pixel coordinates and keeps files small
    const double r = std::round(v * 10.0) / 10.0;
    std::string s = format_double(r);
    return s;
}

void open_svg(std::ostringstream& out, const std::string& title) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
    out << "<rect width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
    out << "<text x=\"" << kWidth / 2 << "\" y=\"16\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"13\">" << title << "</text>\n";
}

void axes(std::ostringstream& out, const std::string& x_label, const std::string& y_label) {
    out << "<line x1=\"" << px(x_px(0)) << "\" y1=\"" << px(y_px(0)) << "\" x2=\""
        << px(x_px(1)) << "\" y2=\"" << px(y_px(0)) << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << px(x_px(0)) << "\" y1=\"" << px(y_px(0)) << "\" x2=\""
        << px(x_px(0)) << "\" y2=\"" << px(y_px(1)) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 8
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << x_label
        << "</text>\n";
    out << "<text x=\"14\" y=\"" << kHeight / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
        << "transform=\"rotate(-90 14 " << kHeight / 2 << ")\">" << y_label << "</text>\n";
}

void y_ticks_unit(std::ostringstream& out) {
    for (int i = 0; i <= 5; ++i) {
        const double f = i / 5.0;
        out << "<text x=\"" << kMarginLeft - 6 << "\" y=\"" << px(y_px(f) + 4)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">"
            << format_double(f) << "</text>\n";
        out << "<line x1=\"" << px(x_px(0) - 3) << "\" y1=\"" << px(y_px(f)) << "\" x2=\""
            << px(x_px(0)) << "\" y2=\"" << px(y_px(f)) << "\" stroke=\"black\"/>\n";
    }
}

std::string join_values(const std::vector<double>& vals) {
    std::string s;
    for (std::size_t i = 0; i < vals.size(); ++i) {
        if (i) s += ',';
        s += format_double(vals[i]);
    }
    return s;
}

// Series plot shared by the accuracy and LCA figures. x runs over
// x_start .. x_start + n - 1.
std::string series_svg(const std::map<std::string, std::vector<double>>& series,
                       const std::string& title, const std::string& x_label, int x_start) {
    std::ostringstream out;
    open_svg(out, title);
    axes(out, x_label, "accuracy");
    y_ticks_unit(out);

    std::size_t max_n = 1;
    for (const auto& [_, vals] : series) max_n = std::max(max_n, vals.size());
    const double denom = (max_n > 1) ? static_cast<double>(max_n - 1) : 1.0;

    int color = 0;
    int row = 0;
    for (const auto& [name, vals] : series) {
        const char* stroke = kPalette[color % kPaletteSize];
        ++color;
        std::string points;
        for (std::size_t i = 0; i < vals.size(); ++i) {
            if (i) points += ' ';
            points += px(x_px(i / denom)) + "," + px(y_px(std::clamp(vals[i], 0.0, 1.0)));
        }
        out << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.5\" "
            << "data-method=\"" << name << "\" data-values=\"" << join_values(vals)
            << "\" points=\"" << points << "\"/>\n";
        const int ly = kMarginTop + 14 * row++;
        out << "<line x1=\"" << kWidth - 130 << "\" y1=\"" << ly << "\" x2=\"" << kWidth - 110
            << "\" y2=\"" << ly << "\" stroke=\"" << stroke << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << kWidth - 105 << "\" y=\"" << ly + 4
            << "\" font-family=\"sans-serif\" font-size=\"11\">" << name << "</text>\n";
    }

    // x tick labels at both ends
    out << "<text x=\"" << px(x_px(0)) << "\" y=\"" << kHeight - kMarginBottom + 14
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << x_start
        << "</text>\n";
    out << "<text x=\"" << px(x_px(1)) << "\" y=\"" << kHeight - kMarginBottom + 14
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">"
        << (x_start + static_cast<int>(max_n) - 1) << "</text>\n";
    out << "</svg>\n";
    return out.str();
}

}  // namespace

std::string accuracy_plot_svg(const std::map<std::string, std::vector<double>>& a_k_by_method) {
    return series_svg(a_k_by_method, "average accuracy after each task", "task", 1);
}

std::string lca_plot_svg(const std::map<std::string, std::vector<double>>& z_b_by_method) {
    return series_svg(z_b_by_method, "learning curve over the first minibatches", "minibatch", 0);
}

std::string k2_hist_svg(const K2Histogram& hist) {
    std::ostringstream out;
    open_svg(out, "count vs log10(k2)");
    axes(out, "log10(k2)", "count");

    long max_count = 1;
    for (long c : hist.counts) max_count = std::max(max_count, c);
    max_count = std::max({max_count, hist.underflow, hist.overflow});

    // layout: [underflow][bins...][overflow]
    const std::size_t slots = hist.counts.size() + 2;
    const double slot_w = 1.0 / static_cast<double>(slots);
    auto bar = [&](std::size_t slot, long count, const char* fill, const std::string& label) {
        const double x0 = x_px(slot * slot_w) + 1;
        const double h = static_cast<double>(count) / static_cast<double>(max_count);
        const double y0 = y_px(h);
        const double wpx = (x_px(slot_w) - x_px(0)) - 2;
        out << "<rect x=\"" << px(x0) << "\" y=\"" << px(y0) << "\" width=\"" << px(wpx)
            << "\" height=\"" << px(y_px(0) - y0) << "\" fill=\"" << fill
            << "\" data-count=\"" << count << "\" data-bin=\"" << label << "\"/>\n";
    };
    bar(0, hist.underflow, "#d62728", "k2=0");
    for (std::size_t i = 0; i < hist.counts.size(); ++i) {
        bar(i + 1, hist.counts[i],
            "#1f77b4", format_double(hist.edges[i]) + ".." + format_double(hist.edges[i + 1]));
    }
    bar(slots - 1, hist.overflow, "#d62728", "k2=inf");

    out << "<text x=\"" << kWidth - 16 << "\" y=\"" << kMarginTop
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" "
        << "data-fraction-below-one=\"" << format_double(hist.fraction_below_one)
        << "\">fraction k2&lt;1: " << format_double(hist.fraction_below_one) << "</text>\n";
    out << "</svg>\n";
    return out.str();
}

}  // namespace gradmix
