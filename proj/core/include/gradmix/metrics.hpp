#pragma once

#include <map>
#include <string>
#include <tuple>

namespace gradmix {

/// Records a_{k,i,j}: accuracy on task j's test set after update i of task k.
/// Task indices k, j are 1-based in memory, mirroring the usual metric
/// definitions; i counts completed updates within task k (0 = before the
/// first one, N_k = end of task). Serialization is 0-based for k and j.
class AccuracyMatrix {
public:
    using Key = std::tuple<int, int, int>;  // (k, i, j)

    void record(int k, int i, int j, double accuracy);
    void set_task_batches(int k, int n_k);

    bool has(int k, int i, int j) const;
    double at(int k, int i, int j) const;

    /// N_k; falls back to the largest recorded i for task k when not set.
    int task_batches(int k) const;
    int max_task() const;

    const std::map<Key, double>& entries() const { return entries_; }
    const std::map<int, int>& per_task_batches() const { return per_task_batches_; }

    /// CSV with header k,i,j,accuracy; k and j shifted down by one on disk.
    std::string to_csv() const;
    static AccuracyMatrix from_csv(const std::string& text);

private:
    std::map<Key, double> entries_;
    std::map<int, int> per_task_batches_;
};

/// A_k: mean end-of-task-k accuracy over tasks 1..k.
double average_accuracy(const AccuracyMatrix& m, int k);

/// F_k: mean over old tasks of (best past end-of-task accuracy - final
/// accuracy). Throws UndefinedMetricError for k < 2.
double forgetting(const AccuracyMatrix& m, int k);

/// LCA_beta over the first beta+1 minibatch evaluations of each of T tasks.
double lca(const AccuracyMatrix& m, int beta, int T);

}  // namespace gradmix
