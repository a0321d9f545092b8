#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dm {

// In-memory dataset. clean_labels and corrupted_flags exist for audit-only
// metrics; training only ever sees observed_labels.
struct Dataset {
    std::size_t n = 0;
    std::size_t dim = 0;
    std::size_t class_count = 0;
    std::vector<double> features;            // n x dim, row-major
    std::vector<std::size_t> observed_labels;
    std::vector<std::size_t> clean_labels;
    std::vector<bool> corrupted_flags;

    std::span<const double> row(std::size_t i) const {
        return {features.data() + i * dim, dim};
    }
    void validate() const;  // throws on inconsistent shape/labels
};

enum class CorruptionKind { None, Symmetric, Asymmetric };

struct CorruptionSpec {
    CorruptionKind kind = CorruptionKind::None;
    double rate = 0.0;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;  // Asymmetric only
};

struct SyntheticSpec {
    std::size_t class_count = 2;
    std::size_t per_class_count = 5000;
    std::size_t feature_dim = 50;
    double class_center_separation = 4.0;
    double noise_sigma = 1.0;
    std::uint64_t seed = 0;
};

// CSV: header "label,f0,...,f{D-1}". Clean labels := observed, no flags.
Dataset load_csv(const std::string& path, std::size_t class_count);
void save_csv(const Dataset& ds, const std::string& path);

// dmbin: magic "DMD1", u32 N/D/C, N u32 observed labels, N*D f32 features
// (row-major), N u32 clean labels, N u8 flags.
Dataset load_dmbin(const std::string& path);
void save_dmbin(const Dataset& ds, const std::string& path);

// Gaussian blobs, one isotropic cluster per class; fully seed-determined.
Dataset gen_synthetic(const SyntheticSpec& spec);

// Each example flips with probability r to a uniformly drawn *other* class.
Dataset corrupt_symmetric(const Dataset& ds, double r, std::uint64_t seed);

// Only pair members are eligible; each flips to its partner w.p. r.
Dataset corrupt_asymmetric(const Dataset& ds,
                           const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                           double r, std::uint64_t seed);

Dataset corrupt(const Dataset& ds, const CorruptionSpec& spec, std::uint64_t seed);

// Uniform without-replacement subsample per class, original relative order.
Dataset subsample_imbalance(const Dataset& ds, const std::vector<std::size_t>& keep_counts,
                            std::uint64_t seed);

// Stratified by clean label. The validation part keeps clean labels even if
// the caller corrupts the train part afterwards (trusted validation).
std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, std::uint64_t seed);

}  // namespace dm
