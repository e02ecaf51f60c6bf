#include "gradmix/task_stream.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "gradmix/errors.hpp"
#include "gradmix/rng.hpp"

namespace gradmix {

namespace {

constexpr unsigned kImagesMagic = 2051;
constexpr unsigned kLabelsMagic = 2049;

// Purpose tags for child-seed derivation, so the same (seed, task) pair can
// feed several independent streams.
enum SeedPurpose : std::uint64_t {
    kPermSeed = 1,
    kSubsampleSeed = 2,
    kClusterSeed = 3,
    kSplitShuffleSeed = 4,
};

std::uint64_t task_seed(std::uint64_t base, int task, SeedPurpose purpose) {
    return derive_seed(derive_seed(base, static_cast<std::uint64_t>(task)), purpose);
}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::uint32_t read_be32(std::FILE* f, const std::string& path, std::size_t& offset) {
    unsigned char buf[4];
    if (std::fread(buf, 1, 4, f) != 4) throw IdxTruncatedError(path, offset);
    offset += 4;
    return (static_cast<std::uint32_t>(buf[0]) << 24) | (static_cast<std::uint32_t>(buf[1]) << 16) |
           (static_cast<std::uint32_t>(buf[2]) << 8) | static_cast<std::uint32_t>(buf[3]);
}

std::vector<int> identity_indices(int n) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
}

std::vector<int> subsample_without_replacement(int n, int x, std::uint64_t seed) {
    // partial Fisher-Yates: the first x entries are a uniform sample
    std::vector<int> idx = identity_indices(n);
    Rng rng(seed);
    for (int i = 0; i < x; ++i) {
        const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - i)));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(x);
    return idx;
}

std::vector<int> random_permutation(int n, std::uint64_t seed) {
    std::vector<int> perm = identity_indices(n);
    Rng rng(seed);
    rng.shuffle(perm);
    return perm;
}

}  // namespace

ExampleView::ExampleView(std::shared_ptr<const BaseData> base, std::vector<int> indices,
                         std::vector<int> pixel_perm, std::vector<int> label_map)
    : base_(std::move(base)),
      indices_(std::move(indices)),
      pixel_perm_(std::move(pixel_perm)),
      label_map_(std::move(label_map)) {}

int ExampleView::label(int i) const {
    const int raw = base_->labels[static_cast<std::size_t>(indices_[i])];
    return label_map_.empty() ? raw : label_map_[static_cast<std::size_t>(raw)];
}

void ExampleView::copy_input(int i, double* out) const {
    const int dim = base_->input_dim;
    const double* src = &base_->inputs[static_cast<std::size_t>(indices_[i]) * dim];
    if (pixel_perm_.empty()) {
        std::copy(src, src + dim, out);
    } else {
        for (int j = 0; j < dim; ++j) out[j] = src[pixel_perm_[j]];
    }
}

Batch ExampleView::gather(std::span<const int> idxs, int task_id, int head) const {
    Batch b;
    b.task_id = task_id;
    b.head = head;
    const int dim = input_dim();
    b.inputs.resize(idxs.size() * static_cast<std::size_t>(dim));
    b.labels.resize(idxs.size());
    for (std::size_t r = 0; r < idxs.size(); ++r) {
        copy_input(idxs[r], &b.inputs[r * dim]);
        b.labels[r] = label(idxs[r]);
    }
    return b;
}

std::vector<Batch> ExampleView::chunked(int chunk, int task_id, int head) const {
    std::vector<Batch> out;
    std::vector<int> idxs;
    for (int start = 0; start < size(); start += chunk) {
        const int stop = std::min(size(), start + chunk);
        idxs.resize(stop - start);
        std::iota(idxs.begin(), idxs.end(), start);
        out.push_back(gather(idxs, task_id, head));
    }
    return out;
}

BaseData load_idx(const std::string& images_path, const std::string& labels_path) {
    BaseData data;

    // labels
    std::vector<int> labels;
    {
        FilePtr f(std::fopen(labels_path.c_str(), "rb"));
        if (!f) throw IdxError(labels_path + ": cannot open");
        std::size_t off = 0;
        const std::uint32_t magic = read_be32(f.get(), labels_path, off);
        if (magic != kLabelsMagic) throw IdxBadMagicError(labels_path, kLabelsMagic, magic);
        const std::uint32_t count = read_be32(f.get(), labels_path, off);
        labels.resize(count);
        std::vector<unsigned char> raw(count);
        if (count > 0 && std::fread(raw.data(), 1, count, f.get()) != count) {
            throw IdxTruncatedError(labels_path, off);
        }
        for (std::uint32_t i = 0; i < count; ++i) labels[i] = raw[i];
    }

    // images
    {
        FilePtr f(std::fopen(images_path.c_str(), "rb"));
        if (!f) throw IdxError(images_path + ": cannot open");
        std::size_t off = 0;
        const std::uint32_t magic = read_be32(f.get(), images_path, off);
        if (magic != kImagesMagic) throw IdxBadMagicError(images_path, kImagesMagic, magic);
        const std::uint32_t count = read_be32(f.get(), images_path, off);
        const std::uint32_t rows = read_be32(f.get(), images_path, off);
        const std::uint32_t cols = read_be32(f.get(), images_path, off);
        if (count != labels.size()) throw IdxCountMismatchError(count, labels.size());

        const std::size_t dim = static_cast<std::size_t>(rows) * cols;
        data.input_dim = static_cast<int>(dim);
        data.inputs.resize(count * dim);
        std::vector<unsigned char> row(dim);
        for (std::uint32_t i = 0; i < count; ++i) {
            const std::size_t got = std::fread(row.data(), 1, dim, f.get());
            if (got != dim) throw IdxTruncatedError(images_path, off + got);
            double* out = &data.inputs[i * dim];
            for (std::size_t j = 0; j < dim; ++j) out[j] = row[j] / 255.0;
            off += dim;
        }
    }

    data.labels = std::move(labels);
    int max_label = 0;
    for (int l : data.labels) max_label = std::max(max_label, l);
    data.num_classes = max_label + 1;
    return data;
}

BaseData make_synthetic_base(int n, int dim, int classes, std::uint64_t seed) {
    if (n < 1 || dim < 1 || classes < 1) throw std::invalid_argument("bad synthetic shape");
    Rng rng(seed);

    // Cluster means: rejection-sample directions on a radius-8 sphere until
    // all pairwise distances reach 6 sigma (sigma = 1), so the pool is
    // Bayes-separable by construction.
    const double radius = 8.0;
    std::vector<std::vector<double>> means;
    while (static_cast<int>(means.size()) < classes) {
        std::vector<double> m(dim);
        double nn = 0.0;
        for (double& v : m) {
            v = rng.normal();
            nn += v * v;
        }
        nn = std::sqrt(nn);
        if (nn == 0.0) continue;
        for (double& v : m) v *= radius / nn;
        bool ok = true;
        for (const auto& other : means) {
            double d2 = 0.0;
            for (int j = 0; j < dim; ++j) d2 += (m[j] - other[j]) * (m[j] - other[j]);
            if (d2 < 36.0) {
                ok = false;
                break;
            }
        }
        if (ok) means.push_back(std::move(m));
    }

    BaseData data;
    data.input_dim = dim;
    data.num_classes = classes;
    data.inputs.resize(static_cast<std::size_t>(n) * dim);
    data.labels.resize(n);
    for (int i = 0; i < n; ++i) {
        const int c = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
        data.labels[i] = c;
        double* out = &data.inputs[static_cast<std::size_t>(i) * dim];
        for (int j = 0; j < dim; ++j) out[j] = means[c][j] + rng.normal();
    }
    return data;
}

std::vector<TaskSpec> make_permuted_stream(const SourceData& base, const StreamConfig& cfg) {
    if (cfg.kind != StreamKind::permuted) throw std::invalid_argument("cfg.kind != permuted");
    if (!base.train || !base.test) throw std::invalid_argument("permuted stream needs base data");
    const int n_train = base.train->size();
    const int x = cfg.examples_per_task;
    if (x > n_train) {
        throw std::invalid_argument("examples_per_task exceeds base train size");
    }
    const int dim = base.train->input_dim;

    std::vector<TaskSpec> stream;
    for (int t = 0; t < cfg.num_tasks; ++t) {
        std::vector<int> perm;  // empty = identity for task 0
        if (t > 0) perm = random_permutation(dim, task_seed(cfg.seed, t, kPermSeed));
        std::vector<int> train_idx =
            (x > 0) ? subsample_without_replacement(n_train, x, task_seed(cfg.seed, t, kSubsampleSeed))
                    : identity_indices(n_train);
        TaskSpec task;
        task.task_id = t;
        task.head = 0;
        task.train = ExampleView(base.train, std::move(train_idx), perm);
        task.test = ExampleView(base.test, identity_indices(base.test->size()), perm);
        stream.push_back(std::move(task));
    }
    return stream;
}

std::vector<TaskSpec> make_split_stream(const SourceData& base, const StreamConfig& cfg) {
    if (cfg.kind != StreamKind::split) throw std::invalid_argument("cfg.kind != split");
    if (!base.train || !base.test) throw std::invalid_argument("split stream needs base data");
    const int classes = base.train->num_classes;
    if (classes < cfg.num_tasks || classes % cfg.num_tasks != 0) {
        throw std::invalid_argument("cannot split " + std::to_string(classes) + " classes into " +
                                    std::to_string(cfg.num_tasks) + " equal groups");
    }
    const int group = classes / cfg.num_tasks;

    std::vector<int> order = identity_indices(classes);
    {
        Rng rng(derive_seed(cfg.seed, kSplitShuffleSeed));
        rng.shuffle(order);
    }

    std::vector<TaskSpec> stream;
    for (int t = 0; t < cfg.num_tasks; ++t) {
        std::vector<int> label_map(classes, -1);
        for (int j = 0; j < group; ++j) label_map[order[t * group + j]] = j;

        auto select = [&](const BaseData& src) {
            std::vector<int> idx;
            for (int i = 0; i < src.size(); ++i) {
                if (label_map[src.labels[i]] >= 0) idx.push_back(i);
            }
            return idx;
        };
        std::vector<int> train_idx = select(*base.train);
        if (cfg.examples_per_task > 0 &&
            cfg.examples_per_task < static_cast<int>(train_idx.size())) {
            std::vector<int> keep = subsample_without_replacement(
                static_cast<int>(train_idx.size()), cfg.examples_per_task,
                task_seed(cfg.seed, t, kSubsampleSeed));
            std::vector<int> sub;
            sub.reserve(keep.size());
            for (int k : keep) sub.push_back(train_idx[k]);
            train_idx = std::move(sub);
        }

        TaskSpec task;
        task.task_id = t;
        task.head = t;
        task.train = ExampleView(base.train, std::move(train_idx), {}, label_map);
        task.test = ExampleView(base.test, select(*base.test), {}, label_map);
        stream.push_back(std::move(task));
    }
    return stream;
}

std::vector<TaskSpec> make_synthetic_stream(const StreamConfig& cfg) {
    if (cfg.kind != StreamKind::synthetic) throw std::invalid_argument("cfg.kind != synthetic");
    const int train_n = cfg.examples_per_task > 0 ? cfg.examples_per_task : 1000;
    const int test_n = cfg.synthetic_test_per_task;

    std::vector<TaskSpec> stream;
    for (int t = 0; t < cfg.num_tasks; ++t) {
        auto pool = std::make_shared<BaseData>(
            make_synthetic_base(train_n + test_n, cfg.synthetic_dim, cfg.synthetic_classes,
                                task_seed(cfg.seed, t, kClusterSeed)));
        std::vector<int> train_idx(train_n), test_idx(test_n);
        std::iota(train_idx.begin(), train_idx.end(), 0);
        std::iota(test_idx.begin(), test_idx.end(), train_n);

        TaskSpec task;
        task.task_id = t;
        task.head = 0;
        task.train = ExampleView(pool, std::move(train_idx));
        task.test = ExampleView(pool, std::move(test_idx));
        stream.push_back(std::move(task));
    }
    return stream;
}

std::pair<std::vector<TaskSpec>, std::vector<TaskSpec>> partition_cv(
    const std::vector<TaskSpec>& stream, const StreamConfig& cfg) {
    if (cfg.cv_tasks < 0 || cfg.cv_tasks > static_cast<int>(stream.size())) {
        throw std::invalid_argument("cv_tasks out of range");
    }
    std::vector<TaskSpec> cv(stream.begin(), stream.begin() + cfg.cv_tasks);
    std::vector<TaskSpec> eval(stream.begin() + cfg.cv_tasks, stream.end());
    return {std::move(cv), std::move(eval)};
}

}  // namespace gradmix
