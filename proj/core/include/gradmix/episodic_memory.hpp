#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "gradmix/net.hpp"
#include "gradmix/rng.hpp"

namespace gradmix {

/// One remembered example, tagged with its originating task so reference
/// losses route through the correct head.
struct StoredExample {
    std::vector<double> input;
    int label = 0;
};

/// How a full per-task store treats newcomers.
enum class MemoryMode {
    reservoir,  // uniform over everything offered (default)
    ring        // keep the most recent `capacity` examples
};

/// Bounded per-task example stores populated online. Single writer; the
/// trainer is sequential so no locking is provided.
class EpisodicMemory {
public:
    EpisodicMemory(int capacity_per_task, std::uint64_t seed,
                   MemoryMode mode = MemoryMode::reservoir);

    /// Offer one example from task `task_id`. Below capacity it is always
    /// kept; afterwards reservoir mode keeps it with probability
    /// capacity / seen_count in a uniformly random slot.
    void offer(int task_id, int head, std::vector<double> input, int label);

    /// Uniform sample (with replacement) of `batch_size` examples from the
    /// union of all stores of tasks < current_task, grouped per task into
    /// head-routed batches. If the union holds fewer than batch_size
    /// examples the whole union is returned exactly once. Empty union (no
    /// past examples) signals nullopt.
    std::optional<std::vector<Batch>> sample_ref_batch(int current_task, int batch_size,
                                                       Rng& rng) const;

    /// GEM's per-task references: the full store of every task < current_task
    /// as one batch each, in task order. Throws std::runtime_error if any
    /// past task's store is empty.
    std::vector<Batch> past_task_batches(int current_task) const;

    int store_size(int task_id) const;
    std::int64_t seen_count(int task_id) const;
    int capacity_per_task() const { return capacity_; }
    const std::vector<StoredExample>& store(int task_id) const;

private:
    struct TaskStore {
        std::vector<StoredExample> examples;
        std::int64_t seen = 0;
        int head = 0;
        std::int64_t next_slot = 0;  // ring mode cursor
    };

    int capacity_;
    MemoryMode mode_;
    Rng rng_;
    std::map<int, TaskStore> stores_;
};

/// g_k = exact gradient (and loss) of the mean loss over the entire store
/// M_k, one entry per past task in task order. Empty result for
/// current_task = 0; throws if a past store is empty.
std::vector<LossGrad> per_task_ref_grads(const EpisodicMemory& mem, const NetworkSpec& spec,
                                         const Vec& w, int current_task);

}  // namespace gradmix
