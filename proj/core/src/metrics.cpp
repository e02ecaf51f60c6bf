#include "gradmix/metrics.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "gradmix/errors.hpp"
#include "gradmix/text_io.hpp"

namespace gradmix {

namespace {

std::string key_str(int k, int i, int j) {
    return "a(" + std::to_string(k) + "," + std::to_string(i) + "," + std::to_string(j) + ")";
}

}  // namespace

void AccuracyMatrix::record(int k, int i, int j, double accuracy) {
    if (k < 1 || j < 1 || i < 0) throw std::invalid_argument("bad accuracy-matrix index");
    if (!(accuracy >= 0.0 && accuracy <= 1.0)) {
        throw std::invalid_argument("accuracy outside [0, 1]");
    }
    entries_[{k, i, j}] = accuracy;
}

void AccuracyMatrix::set_task_batches(int k, int n_k) {
    if (k < 1 || n_k < 0) throw std::invalid_argument("bad task batch count");
    per_task_batches_[k] = n_k;
}

bool AccuracyMatrix::has(int k, int i, int j) const {
    return entries_.count({k, i, j}) > 0;
}

double AccuracyMatrix::at(int k, int i, int j) const {
    auto it = entries_.find({k, i, j});
    if (it == entries_.end()) throw MissingEntriesError("missing entry " + key_str(k, i, j));
    return it->second;
}

int AccuracyMatrix::task_batches(int k) const {
    auto it = per_task_batches_.find(k);
    if (it != per_task_batches_.end()) return it->second;
    int best = -1;
    for (const auto& [key, _] : entries_) {
        if (std::get<0>(key) == k) best = std::max(best, std::get<1>(key));
    }
    if (best < 0) throw MissingEntriesError("no entries for task " + std::to_string(k));
    return best;
}

int AccuracyMatrix::max_task() const {
    int mx = 0;
    for (const auto& [key, _] : entries_) mx = std::max(mx, std::get<0>(key));
    return mx;
}

std::string AccuracyMatrix::to_csv() const {
    std::ostringstream out;
    out << "k,i,j,accuracy\n";
    for (const auto& [key, acc] : entries_) {
        out << (std::get<0>(key) - 1) << ',' << std::get<1>(key) << ',' << (std::get<2>(key) - 1)
            << ',' << format_double(acc) << '\n';
    }
    return out.str();
}

AccuracyMatrix AccuracyMatrix::from_csv(const std::string& text) {
    AccuracyMatrix m;
    std::istringstream in(text);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        std::string_view sv = trim(line);
        if (sv.empty() || sv.front() == '#') continue;
        if (header) {
            header = false;
            continue;
        }
        const auto cols = split(sv, ',');
        if (cols.size() != 4) throw std::runtime_error("bad accuracy-matrix row: " + line);
        const int k = static_cast<int>(parse_double(trim(cols[0]))) + 1;
        const int i = static_cast<int>(parse_double(trim(cols[1])));
        const int j = static_cast<int>(parse_double(trim(cols[2]))) + 1;
        m.record(k, i, j, parse_double(trim(cols[3])));
    }
    // N_k is recovered as the largest recorded i per task (the end-of-task
    // evaluation is always the last one).
    for (int k = 1; k <= m.max_task(); ++k) {
        int best = -1;
        for (const auto& [key, _] : m.entries_) {
            if (std::get<0>(key) == k) best = std::max(best, std::get<1>(key));
        }
        if (best >= 0) m.per_task_batches_[k] = best;
    }
    return m;
}

double average_accuracy(const AccuracyMatrix& m, int k) {
    if (k < 1) throw std::invalid_argument("average_accuracy needs k >= 1");
    const int n_k = m.task_batches(k);
    std::string missing;
    double sum = 0.0;
    for (int j = 1; j <= k; ++j) {
        if (!m.has(k, n_k, j)) {
            missing += (missing.empty() ? "" : ", ") + key_str(k, n_k, j);
        } else {
            sum += m.at(k, n_k, j);
        }
    }
    if (!missing.empty()) throw MissingEntriesError("average_accuracy: missing " + missing);
    return sum / k;
}

double forgetting(const AccuracyMatrix& m, int k) {
    if (k < 2) throw UndefinedMetricError("forgetting undefined for k < 2");
    const int n_k = m.task_batches(k);
    double sum = 0.0;
    for (int j = 1; j <= k - 1; ++j) {
        double best = -1.0;
        for (int l = 1; l <= k - 1; ++l) {
            if (l < j) continue;  // task j first evaluated at l = j
            best = std::max(best, m.at(l, m.task_batches(l), j));
        }
        sum += best - m.at(k, n_k, j);
    }
    return sum / (k - 1);
}

double lca(const AccuracyMatrix& m, int beta, int T) {
    if (beta < 0 || T < 1) throw std::invalid_argument("bad lca arguments");
    double outer = 0.0;
    for (int b = 0; b <= beta; ++b) {
        double inner = 0.0;
        for (int k = 1; k <= T; ++k) inner += m.at(k, b, k);
        outer += inner / T;
    }
    return outer / (beta + 1);
}

}  // namespace gradmix
