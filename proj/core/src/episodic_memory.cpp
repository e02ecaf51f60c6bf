#include "gradmix/episodic_memory.hpp"

#include <stdexcept>
#include <string>
#include <utility>

namespace gradmix {

EpisodicMemory::EpisodicMemory(int capacity_per_task, std::uint64_t seed, MemoryMode mode)
    : capacity_(capacity_per_task), mode_(mode), rng_(seed) {
    if (capacity_per_task < 1) throw std::invalid_argument("capacity must be >= 1");
}

void EpisodicMemory::offer(int task_id, int head, std::vector<double> input, int label) {
    TaskStore& st = stores_[task_id];
    st.head = head;
    st.seen += 1;
    if (static_cast<int>(st.examples.size()) < capacity_) {
        st.examples.push_back({std::move(input), label});
        return;
    }
    if (mode_ == MemoryMode::ring) {
        st.examples[static_cast<std::size_t>(st.next_slot)] = {std::move(input), label};
        st.next_slot = (st.next_slot + 1) % capacity_;
        return;
    }
    // Algorithm R: keep with probability capacity / seen, in a uniform slot.
    const std::uint64_t j = rng_.below(static_cast<std::uint64_t>(st.seen));
    if (j < static_cast<std::uint64_t>(capacity_)) {
        st.examples[static_cast<std::size_t>(j)] = {std::move(input), label};
    }
}

std::optional<std::vector<Batch>> EpisodicMemory::sample_ref_batch(int current_task,
                                                                   int batch_size,
                                                                   Rng& rng) const {
    // Flat index over the union of past stores, in task order.
    struct Range {
        int task;
        const TaskStore* st;
        std::int64_t begin;
    };
    std::vector<Range> ranges;
    std::int64_t total = 0;
    for (const auto& [task, st] : stores_) {
        if (task >= current_task || st.examples.empty()) continue;
        ranges.push_back({task, &st, total});
        total += static_cast<std::int64_t>(st.examples.size());
    }
    if (total == 0) return std::nullopt;

    // task -> gathered example indices within that task's store
    std::map<int, std::vector<int>> picks;
    if (total <= batch_size) {
        for (const auto& r : ranges) {
            auto& v = picks[r.task];
            for (int i = 0; i < static_cast<int>(r.st->examples.size()); ++i) v.push_back(i);
        }
    } else {
        for (int n = 0; n < batch_size; ++n) {
            const std::int64_t flat = static_cast<std::int64_t>(
                rng.below(static_cast<std::uint64_t>(total)));
            // ranges are few; linear scan is fine
            for (std::size_t r = 0; r < ranges.size(); ++r) {
                const std::int64_t sz = static_cast<std::int64_t>(ranges[r].st->examples.size());
                if (flat < ranges[r].begin + sz) {
                    picks[ranges[r].task].push_back(static_cast<int>(flat - ranges[r].begin));
                    break;
                }
            }
        }
    }

    std::vector<Batch> out;
    for (const auto& [task, idxs] : picks) {
        const TaskStore& st = stores_.at(task);
        Batch b;
        b.task_id = task;
        b.head = st.head;
        b.labels.reserve(idxs.size());
        for (int i : idxs) {
            const StoredExample& ex = st.examples[static_cast<std::size_t>(i)];
            b.inputs.insert(b.inputs.end(), ex.input.begin(), ex.input.end());
            b.labels.push_back(ex.label);
        }
        out.push_back(std::move(b));
    }
    return out;
}

std::vector<Batch> EpisodicMemory::past_task_batches(int current_task) const {
    std::vector<Batch> out;
    for (int task = 0; task < current_task; ++task) {
        auto it = stores_.find(task);
        if (it == stores_.end() || it->second.examples.empty()) {
            throw std::runtime_error("episodic store for task " + std::to_string(task) +
                                     " is empty");
        }
        const TaskStore& st = it->second;
        Batch b;
        b.task_id = task;
        b.head = st.head;
        for (const auto& ex : st.examples) {
            b.inputs.insert(b.inputs.end(), ex.input.begin(), ex.input.end());
            b.labels.push_back(ex.label);
        }
        out.push_back(std::move(b));
    }
    return out;
}

int EpisodicMemory::store_size(int task_id) const {
    auto it = stores_.find(task_id);
    return it == stores_.end() ? 0 : static_cast<int>(it->second.examples.size());
}

std::int64_t EpisodicMemory::seen_count(int task_id) const {
    auto it = stores_.find(task_id);
    return it == stores_.end() ? 0 : it->second.seen;
}

const std::vector<StoredExample>& EpisodicMemory::store(int task_id) const {
    return stores_.at(task_id).examples;
}

std::vector<LossGrad> per_task_ref_grads(const EpisodicMemory& mem, const NetworkSpec& spec,
                                         const Vec& w, int current_task) {
    std::vector<LossGrad> out;
    for (const Batch& b : mem.past_task_batches(current_task)) {
        out.push_back(loss_and_grad(spec, w, b));
    }
    return out;
}

}  // namespace gradmix
