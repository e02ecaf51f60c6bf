#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gradmix/net.hpp"

namespace gradmix {

/// A labeled pool of examples, inputs row-major n x input_dim.
struct BaseData {
    int input_dim = 0;
    int num_classes = 0;
    std::vector<double> inputs;
    std::vector<int> labels;

    int size() const { return static_cast<int>(labels.size()); }
};

/// Immutable view over shared base examples: a subset selection plus an
/// optional pixel permutation and label remap. Tasks built from the same
/// base share its storage, so twenty permuted tasks cost twenty index
/// vectors, not twenty copies of the data.
class ExampleView {
public:
    ExampleView() = default;
    ExampleView(std::shared_ptr<const BaseData> base, std::vector<int> indices,
                std::vector<int> pixel_perm = {}, std::vector<int> label_map = {});

    int size() const { return static_cast<int>(indices_.size()); }
    int input_dim() const { return base_ ? base_->input_dim : 0; }
    int label(int i) const;
    void copy_input(int i, double* out) const;

    /// Materialize selected examples (view-local indices) into one batch.
    Batch gather(std::span<const int> idxs, int task_id, int head) const;

    /// The whole view as consecutive batches of at most `chunk` examples.
    std::vector<Batch> chunked(int chunk, int task_id, int head) const;

private:
    std::shared_ptr<const BaseData> base_;
    std::vector<int> indices_;     // positions into base
    std::vector<int> pixel_perm_;  // empty = identity; out[j] = in[perm[j]]
    std::vector<int> label_map_;   // empty = identity
};

/// One task of the continuum: train/test splits plus the head its labels
/// route through.
struct TaskSpec {
    int task_id = 0;
    int head = 0;
    ExampleView train;
    ExampleView test;
};

enum class StreamKind { permuted, split, synthetic };

struct StreamConfig {
    StreamKind kind = StreamKind::synthetic;
    int num_tasks = 1;
    int examples_per_task = 0;  // X; 0 = all available
    int cv_tasks = 0;
    std::uint64_t seed = 0;

    // synthetic generator knobs (also the fallback base for permuted/split)
    int synthetic_dim = 20;
    int synthetic_classes = 5;
    int synthetic_test_per_task = 500;
};

/// Train and test pools the permuted/split generators draw from.
struct SourceData {
    std::shared_ptr<const BaseData> train;
    std::shared_ptr<const BaseData> test;
};

/// Parse one IDX image/label file pair (big-endian, magic 0x803 / 0x801),
/// pixels scaled to [0, 1]. Throws IdxBadMagicError, IdxTruncatedError or
/// IdxCountMismatchError.
BaseData load_idx(const std::string& images_path, const std::string& labels_path);

/// Gaussian-cluster pool: `n` examples, `classes` cluster means at least six
/// sigma apart (unit sigma), deterministic in `seed`.
BaseData make_synthetic_base(int n, int dim, int classes, std::uint64_t seed);

/// Task 0 is the identity permutation; later tasks each get one fixed
/// seed-derived pixel permutation. X > 0 subsamples train uniformly without
/// replacement; test sets stay full.
std::vector<TaskSpec> make_permuted_stream(const SourceData& base, const StreamConfig& cfg);

/// Classes are shuffled once, then cut into num_tasks disjoint groups of
/// equal size; task t holds exactly its group's examples with labels
/// remapped to 0..group-1 and head = t.
std::vector<TaskSpec> make_split_stream(const SourceData& base, const StreamConfig& cfg);

/// Fresh Gaussian-cluster tasks, one seed-derived mean set per task, all on
/// head 0. X = 0 defaults to 1000 train examples per task.
std::vector<TaskSpec> make_synthetic_stream(const StreamConfig& cfg);

/// First cfg.cv_tasks tasks for cross-validation, the rest for evaluation,
/// order preserved.
std::pair<std::vector<TaskSpec>, std::vector<TaskSpec>> partition_cv(
    const std::vector<TaskSpec>& stream, const StreamConfig& cfg);

}  // namespace gradmix
