// include/xmodal/dataset.hpp
#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "xmodal/matrix.hpp"

namespace xmodal {

enum class LabelMode { single_label, multi_label };
enum class Pairing { paired, unpaired_unlabeled };

inline std::string label_mode_name(LabelMode m) {
    return m == LabelMode::single_label ? "single_label" : "multi_label";
}

inline LabelMode label_mode_from_name(const std::string& s) {
    if (s == "single_label") return LabelMode::single_label;
    if (s == "multi_label") return LabelMode::multi_label;
    throw LoadError("unknown label_mode: " + s);
}

// ---------------------------------------------------------------------------
// Matrix file format: first non-comment line "rows cols", then `rows` lines
// of `cols` space-separated reals. '#'-prefixed lines are comments.
// ---------------------------------------------------------------------------

inline void save_matrix(const std::filesystem::path& path, const Matrix& m) {
    std::ofstream os(path);
    if (!os) throw LoadError("save_matrix: cannot open for write: " + path.string());
    os << m.rows << " " << m.cols << "\n";
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = 0; j < m.cols; ++j) {
            if (j) os << " ";
            os << format_double_17(m(i, j));
        }
        os << "\n";
    }
    if (!os) throw LoadError("save_matrix: write failed: " + path.string());
}

inline Matrix load_matrix(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw LoadError("load_matrix: cannot open: " + path.string());
    std::string line;
    auto next_content_line = [&](std::string& out) {
        while (std::getline(is, out)) {
            const auto pos = out.find_first_not_of(" \t\r");
            if (pos == std::string::npos) continue;  // blank
            if (out[pos] == '#') continue;           // comment
            return true;
        }
        return false;
    };
    if (!next_content_line(line)) throw LoadError("load_matrix: empty file: " + path.string());
    std::istringstream header(line);
    long long rows = -1, cols = -1;
    if (!(header >> rows >> cols) || rows < 0 || cols < 0)
        throw LoadError("load_matrix: bad header in " + path.string());
    Matrix m(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
    std::size_t row = 0;
    while (row < m.rows) {
        if (!next_content_line(line))
            throw LoadError("load_matrix: truncated at row " + std::to_string(row) + " in " + path.string());
        std::istringstream ls(line);
        for (std::size_t j = 0; j < m.cols; ++j) {
            if (!(ls >> m(row, j)))
                throw LoadError("load_matrix: bad value at row " + std::to_string(row) + ", col " +
                                std::to_string(j) + " in " + path.string());
        }
        std::string extra;
        if (ls >> extra)
            throw LoadError("load_matrix: extra data on row " + std::to_string(row) + " in " + path.string());
        ++row;
    }
    m.assert_finite("load_matrix " + path.string());
    return m;
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

// Two feature matrices plus ground-truth labels for the labeled prefix.
// Column i of both modalities refers to the same item when paired.
struct ModalityDataset {
    Matrix features_x;  // d_x x N_x
    Matrix features_y;  // d_y x N_y
    Matrix labels;      // d_c x N_l, binary
    LabelMode label_mode = LabelMode::single_label;
    Pairing pairing = Pairing::paired;

    std::size_t dim_x() const { return features_x.rows; }
    std::size_t dim_y() const { return features_y.rows; }
    std::size_t num_classes() const { return labels.rows; }
    std::size_t count_x() const { return features_x.cols; }
    std::size_t count_y() const { return features_y.cols; }
    std::size_t labeled_count() const { return labels.cols; }
    // Number of paired items (labeled prefix is always within this range).
    std::size_t paired_count() const { return std::min(count_x(), count_y()); }

    void validate() const {
        if (features_x.empty() || features_y.empty()) throw ValidationError("dataset: empty feature matrix");
        if (labels.cols == 0) throw ValidationError("dataset: no labeled samples");
        if (labels.cols > paired_count())
            throw ValidationError("dataset: labeled prefix exceeds paired sample count");
        if (pairing == Pairing::paired && count_x() != count_y())
            throw ValidationError("dataset: paired data requires N_x = N_y");
        for (std::size_t j = 0; j < labels.cols; ++j) {
            std::size_t ones_count = 0;
            for (std::size_t i = 0; i < labels.rows; ++i) {
                const double v = labels(i, j);
                if (v != 0.0 && v != 1.0)
                    throw ValidationError("dataset: non-binary label entry in column " + std::to_string(j));
                if (v == 1.0) ++ones_count;
            }
            if (label_mode == LabelMode::single_label && ones_count != 1)
                throw ValidationError("dataset: single-label column " + std::to_string(j) + " has " +
                                      std::to_string(ones_count) + " ones");
            if (label_mode == LabelMode::multi_label && ones_count == 0)
                throw ValidationError("dataset: multi-label column " + std::to_string(j) + " has no tag");
        }
    }
};

inline ModalityDataset load_dataset(const std::filesystem::path& features_x_path,
                                    const std::filesystem::path& features_y_path,
                                    const std::filesystem::path& labels_path, LabelMode mode) {
    ModalityDataset ds;
    ds.features_x = load_matrix(features_x_path);
    ds.features_y = load_matrix(features_y_path);
    ds.labels = load_matrix(labels_path);
    ds.label_mode = mode;
    ds.pairing = ds.count_x() == ds.count_y() ? Pairing::paired : Pairing::unpaired_unlabeled;
    try {
        ds.validate();
    } catch (const ValidationError& e) {
        throw LoadError(std::string("load_dataset: ") + e.what());
    }
    return ds;
}

// Manifest JSON names the three matrix files (relative to the manifest) and
// the label mode.
inline void save_dataset(const std::filesystem::path& dir, const ModalityDataset& ds,
                         const std::string& manifest_name = "manifest.json") {
    std::filesystem::create_directories(dir);
    save_matrix(dir / "features_x.txt", ds.features_x);
    save_matrix(dir / "features_y.txt", ds.features_y);
    save_matrix(dir / "labels.txt", ds.labels);
    nlohmann::json manifest = {
        {"format", "xmodal-dataset"},
        {"version", 1},
        {"features_x", "features_x.txt"},
        {"features_y", "features_y.txt"},
        {"labels", "labels.txt"},
        {"label_mode", label_mode_name(ds.label_mode)},
    };
    std::ofstream os(dir / manifest_name);
    if (!os) throw LoadError("save_dataset: cannot write manifest in " + dir.string());
    os << manifest.dump(2) << "\n";
}

inline ModalityDataset load_dataset_manifest(const std::filesystem::path& manifest_path) {
    std::ifstream is(manifest_path);
    if (!is) throw LoadError("load_dataset_manifest: cannot open: " + manifest_path.string());
    nlohmann::json manifest;
    try {
        is >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw LoadError("load_dataset_manifest: bad JSON: " + std::string(e.what()));
    }
    const auto base = manifest_path.parent_path();
    return load_dataset(base / manifest.at("features_x").get<std::string>(),
                        base / manifest.at("features_y").get<std::string>(),
                        base / manifest.at("labels").get<std::string>(),
                        label_mode_from_name(manifest.at("label_mode").get<std::string>()));
}

// Column-subset of a dataset (features and labels follow the same indices;
// every index must lie in the labeled prefix unless labels are not needed).
inline ModalityDataset subset(const ModalityDataset& ds, std::span<const std::size_t> idx) {
    ModalityDataset out;
    out.features_x = gather_cols(ds.features_x, idx);
    out.features_y = gather_cols(ds.features_y, idx);
    for (std::size_t i : idx)
        if (i >= ds.labeled_count()) throw ConfigError("subset: index outside the labeled prefix");
    out.labels = gather_cols(ds.labels, idx);
    out.label_mode = ds.label_mode;
    out.pairing = ds.pairing;
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic data: per class, one centroid per modality drawn uniformly in
// [-1,1]^d; samples are centroid + N(0, sigma^2 I). In multi-label mode each
// sample picks up every other tag with `extra_tag_prob` and its features
// become the mean of the active-tag centroids plus noise.
// ---------------------------------------------------------------------------

struct SyntheticSpec {
    std::size_t d_x = 32;
    std::size_t d_y = 24;
    std::size_t d_c = 10;
    std::size_t samples_per_class = 30;
    double noise_sigma = 0.15;
    double multi_label_extra_tag_prob = 0.0;
    LabelMode label_mode = LabelMode::single_label;
    std::uint64_t seed = 1;

    void validate() const {
        if (d_x < 2 || d_y < 2 || d_c < 2) throw ConfigError("SyntheticSpec: all dims must be >= 2");
        if (samples_per_class == 0) throw ConfigError("SyntheticSpec: samples_per_class must be >= 1");
        if (noise_sigma < 0.0) throw ConfigError("SyntheticSpec: noise_sigma must be >= 0");
        if (multi_label_extra_tag_prob < 0.0 || multi_label_extra_tag_prob > 1.0)
            throw ConfigError("SyntheticSpec: extra tag probability outside [0,1]");
    }
};

inline ModalityDataset generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> coin(0.0, 1.0);

    Matrix centroids_x(spec.d_x, spec.d_c);
    Matrix centroids_y(spec.d_y, spec.d_c);
    for (std::size_t c = 0; c < spec.d_c; ++c) {
        for (std::size_t i = 0; i < spec.d_x; ++i) centroids_x(i, c) = unit(rng);
        for (std::size_t i = 0; i < spec.d_y; ++i) centroids_y(i, c) = unit(rng);
    }

    const std::size_t n = spec.d_c * spec.samples_per_class;
    ModalityDataset ds;
    ds.features_x = Matrix(spec.d_x, n);
    ds.features_y = Matrix(spec.d_y, n);
    ds.labels = Matrix(spec.d_c, n);
    ds.label_mode = spec.label_mode;
    ds.pairing = Pairing::paired;

    std::vector<std::size_t> tags;
    std::size_t col = 0;
    for (std::size_t c = 0; c < spec.d_c; ++c) {
        for (std::size_t s = 0; s < spec.samples_per_class; ++s, ++col) {
            tags.assign(1, c);
            if (spec.label_mode == LabelMode::multi_label) {
                for (std::size_t other = 0; other < spec.d_c; ++other) {
                    if (other == c) continue;
                    if (coin(rng) < spec.multi_label_extra_tag_prob) tags.push_back(other);
                }
            }
            for (std::size_t t : tags) ds.labels(t, col) = 1.0;
            const double inv = 1.0 / static_cast<double>(tags.size());
            for (std::size_t i = 0; i < spec.d_x; ++i) {
                double mean = 0.0;
                for (std::size_t t : tags) mean += centroids_x(i, t);
                ds.features_x(i, col) = mean * inv + spec.noise_sigma * noise(rng);
            }
            for (std::size_t i = 0; i < spec.d_y; ++i) {
                double mean = 0.0;
                for (std::size_t t : tags) mean += centroids_y(i, t);
                ds.features_y(i, col) = mean * inv + spec.noise_sigma * noise(rng);
            }
        }
    }
    ds.validate();
    return ds;
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

// Index partition: labeled vs unlabeled over the paired item range, and the
// labeled part into NN-anchor / validation / train subsets. In unpaired mode
// the unlabeled x- and y-item sets are disjoint halves, so no unlabeled x
// sample has a corresponding y sample.
struct DatasetSplit {
    std::vector<std::size_t> labeled;
    std::vector<std::size_t> unlabeled;
    std::vector<std::size_t> nn;
    std::vector<std::size_t> val;
    std::vector<std::size_t> train;
    std::vector<std::size_t> unlabeled_x;
    std::vector<std::size_t> unlabeled_y;
    bool unpaired = false;
};

inline DatasetSplit make_splits(const ModalityDataset& ds, double labeled_fraction, double nn_fraction,
                                double val_fraction, bool unpaired, std::uint64_t seed,
                                bool stratified = false) {
    if (!(labeled_fraction > 0.0 && labeled_fraction <= 1.0))
        throw ConfigError("make_splits: labeled_fraction outside (0,1]");
    if (!(nn_fraction > 0.0 && nn_fraction < 1.0) || !(val_fraction > 0.0 && val_fraction < 1.0) ||
        nn_fraction + val_fraction >= 1.0)
        throw ConfigError("make_splits: nn/val fractions invalid");

    const std::size_t n = ds.paired_count();
    const std::size_t n_labeled = static_cast<std::size_t>(std::llround(labeled_fraction * static_cast<double>(n)));
    if (n_labeled == 0) throw ConfigError("make_splits: labeled set is empty");
    if (n_labeled > ds.labeled_count())
        throw ConfigError("make_splits: requested " + std::to_string(n_labeled) +
                          " labeled samples but only " + std::to_string(ds.labeled_count()) +
                          " carry labels");

    DatasetSplit split;
    split.unpaired = unpaired;

    Rng rng(derive_seed(seed, 0));
    std::vector<std::size_t> pool(ds.labeled_count());
    std::iota(pool.begin(), pool.end(), 0);
    if (stratified && ds.label_mode == LabelMode::single_label) {
        // Per-class proportional selection; rounding drift fixed from a
        // shuffled leftover pool.
        std::vector<std::vector<std::size_t>> by_class(ds.num_classes());
        for (std::size_t j = 0; j < ds.labeled_count(); ++j) {
            for (std::size_t i = 0; i < ds.num_classes(); ++i)
                if (ds.labels(i, j) == 1.0) by_class[i].push_back(j);
        }
        std::vector<std::size_t> leftovers;
        for (auto& members : by_class) {
            std::shuffle(members.begin(), members.end(), rng);
            const std::size_t take = static_cast<std::size_t>(
                std::floor(labeled_fraction * static_cast<double>(members.size())));
            split.labeled.insert(split.labeled.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
            leftovers.insert(leftovers.end(), members.begin() + static_cast<std::ptrdiff_t>(take), members.end());
        }
        std::shuffle(leftovers.begin(), leftovers.end(), rng);
        while (split.labeled.size() < n_labeled && !leftovers.empty()) {
            split.labeled.push_back(leftovers.back());
            leftovers.pop_back();
        }
        while (split.labeled.size() > n_labeled) split.labeled.pop_back();
    } else {
        std::shuffle(pool.begin(), pool.end(), rng);
        split.labeled.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_labeled));
    }
    std::sort(split.labeled.begin(), split.labeled.end());

    std::vector<char> is_labeled(n, 0);
    for (std::size_t i : split.labeled) is_labeled[i] = 1;
    for (std::size_t i = 0; i < n; ++i)
        if (!is_labeled[i]) split.unlabeled.push_back(i);

    // NN-anchor / validation / train partition of the labeled set.
    std::vector<std::size_t> shuffled = split.labeled;
    Rng rng2(derive_seed(seed, 1));
    std::shuffle(shuffled.begin(), shuffled.end(), rng2);
    const std::size_t n_nn = static_cast<std::size_t>(std::llround(nn_fraction * static_cast<double>(n_labeled)));
    const std::size_t n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n_labeled)));
    if (n_nn == 0 || n_val == 0 || n_nn + n_val >= n_labeled)
        throw ConfigError("make_splits: nn/val/train fractions produce an empty subset");
    split.nn.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_nn));
    split.val.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(n_nn),
                     shuffled.begin() + static_cast<std::ptrdiff_t>(n_nn + n_val));
    split.train.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(n_nn + n_val), shuffled.end());
    std::sort(split.nn.begin(), split.nn.end());
    std::sort(split.val.begin(), split.val.end());
    std::sort(split.train.begin(), split.train.end());

    if (unpaired && !split.unlabeled.empty()) {
        std::vector<std::size_t> shuffled_ul = split.unlabeled;
        Rng rng3(derive_seed(seed, 2));
        std::shuffle(shuffled_ul.begin(), shuffled_ul.end(), rng3);
        const std::size_t half = (shuffled_ul.size() + 1) / 2;
        split.unlabeled_x.assign(shuffled_ul.begin(), shuffled_ul.begin() + static_cast<std::ptrdiff_t>(half));
        split.unlabeled_y.assign(shuffled_ul.begin() + static_cast<std::ptrdiff_t>(half), shuffled_ul.end());
        std::sort(split.unlabeled_x.begin(), split.unlabeled_x.end());
        std::sort(split.unlabeled_y.begin(), split.unlabeled_y.end());
    } else {
        split.unlabeled_x = split.unlabeled;
        split.unlabeled_y = split.unlabeled;
    }
    return split;
}

}  // namespace xmodal
