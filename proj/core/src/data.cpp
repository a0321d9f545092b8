#include "dm/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "dm/rng.hpp"

namespace dm {

void Dataset::validate() const {
    if (n == 0) throw std::invalid_argument("dataset: empty");
    if (features.size() != n * dim) throw std::invalid_argument("dataset: feature shape mismatch");
    if (observed_labels.size() != n || clean_labels.size() != n || corrupted_flags.size() != n)
        throw std::invalid_argument("dataset: label array length mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        if (observed_labels[i] >= class_count || clean_labels[i] >= class_count)
            throw std::invalid_argument("dataset: label out of range at row " + std::to_string(i));
        if (corrupted_flags[i] != (observed_labels[i] != clean_labels[i]))
            throw std::invalid_argument("dataset: inconsistent corruption flag at row " +
                                        std::to_string(i));
    }
}

Dataset load_csv(const std::string& path, std::size_t class_count) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("load_csv: empty file " + path);
    if (line.rfind("label", 0) != 0)
        throw std::runtime_error("load_csv: missing header in " + path);

    Dataset ds;
    ds.class_count = class_count;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        if (!std::getline(ss, cell, ','))
            throw std::runtime_error("load_csv: malformed row at line " + std::to_string(lineno));
        long label = 0;
        try {
            label = std::stol(cell);
        } catch (const std::exception&) {
            throw std::runtime_error("load_csv: bad label at line " + std::to_string(lineno));
        }
        if (label < 0 || static_cast<std::size_t>(label) >= class_count)
            throw std::runtime_error("load_csv: label out of range at line " + std::to_string(lineno));

        std::vector<double> row;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw std::runtime_error("load_csv: bad feature at line " + std::to_string(lineno));
            }
        }
        if (ds.n == 0) {
            ds.dim = row.size();
            if (ds.dim == 0)
                throw std::runtime_error("load_csv: no features at line " + std::to_string(lineno));
        } else if (row.size() != ds.dim) {
            throw std::runtime_error("load_csv: ragged row at line " + std::to_string(lineno));
        }
        ds.features.insert(ds.features.end(), row.begin(), row.end());
        ds.observed_labels.push_back(static_cast<std::size_t>(label));
        ds.clean_labels.push_back(static_cast<std::size_t>(label));
        ds.corrupted_flags.push_back(false);
        ++ds.n;
    }
    ds.validate();
    return ds;
}

void save_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_csv: cannot open " + path);
    out << "label";
    for (std::size_t j = 0; j < ds.dim; ++j) out << ",f" << j;
    out << "\n";
    out.precision(17);
    for (std::size_t i = 0; i < ds.n; ++i) {
        out << ds.observed_labels[i];
        for (double v : ds.row(i)) out << ',' << v;
        out << "\n";
    }
}

Dataset load_dmbin(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("load_dmbin: cannot open " + path);
    auto fail = [&](const std::string& msg) {
        std::fclose(f);
        throw std::runtime_error("load_dmbin: " + msg + " in " + path);
    };
    char magic[4];
    if (std::fread(magic, 1, 4, f) != 4 || std::memcmp(magic, "DMD1", 4) != 0) fail("bad magic");
    std::uint32_t n = 0, d = 0, c = 0;
    if (std::fread(&n, 4, 1, f) != 1 || std::fread(&d, 4, 1, f) != 1 || std::fread(&c, 4, 1, f) != 1)
        fail("truncated header");

    Dataset ds;
    ds.n = n;
    ds.dim = d;
    ds.class_count = c;
    std::vector<std::uint32_t> labels(n);
    if (n && std::fread(labels.data(), 4, n, f) != n) fail("truncated labels");
    std::vector<float> feats(static_cast<std::size_t>(n) * d);
    if (!feats.empty() && std::fread(feats.data(), 4, feats.size(), f) != feats.size())
        fail("truncated features");
    std::vector<std::uint32_t> clean(n);
    if (n && std::fread(clean.data(), 4, n, f) != n) fail("truncated clean labels");
    std::vector<std::uint8_t> flags(n);
    if (n && std::fread(flags.data(), 1, n, f) != n) fail("truncated flags");
    std::fclose(f);

    ds.features.assign(feats.begin(), feats.end());
    ds.observed_labels.assign(labels.begin(), labels.end());
    ds.clean_labels.assign(clean.begin(), clean.end());
    ds.corrupted_flags.assign(flags.begin(), flags.end());
    ds.validate();
    return ds;
}

void save_dmbin(const Dataset& ds, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("save_dmbin: cannot open " + path);
    std::fwrite("DMD1", 1, 4, f);
    std::uint32_t n = static_cast<std::uint32_t>(ds.n);
    std::uint32_t d = static_cast<std::uint32_t>(ds.dim);
    std::uint32_t c = static_cast<std::uint32_t>(ds.class_count);
    std::fwrite(&n, 4, 1, f);
    std::fwrite(&d, 4, 1, f);
    std::fwrite(&c, 4, 1, f);
    std::vector<std::uint32_t> labels(ds.observed_labels.begin(), ds.observed_labels.end());
    std::fwrite(labels.data(), 4, labels.size(), f);
    std::vector<float> feats(ds.features.begin(), ds.features.end());
    std::fwrite(feats.data(), 4, feats.size(), f);
    std::vector<std::uint32_t> clean(ds.clean_labels.begin(), ds.clean_labels.end());
    std::fwrite(clean.data(), 4, clean.size(), f);
    std::vector<std::uint8_t> flags(ds.n);
    for (std::size_t i = 0; i < ds.n; ++i) flags[i] = ds.corrupted_flags[i] ? 1 : 0;
    std::fwrite(flags.data(), 1, flags.size(), f);
    std::fclose(f);
}

Dataset gen_synthetic(const SyntheticSpec& spec) {
    if (spec.class_count < 2 || spec.per_class_count == 0 || spec.feature_dim == 0)
        throw std::invalid_argument("gen_synthetic: invalid spec");
    if (!(spec.class_center_separation > 0.0) || !(spec.noise_sigma > 0.0))
        throw std::invalid_argument("gen_synthetic: separation and sigma must be > 0");

    Dataset ds;
    ds.class_count = spec.class_count;
    ds.dim = spec.feature_dim;
    ds.n = spec.class_count * spec.per_class_count;
    ds.features.resize(ds.n * ds.dim);
    ds.observed_labels.resize(ds.n);
    ds.clean_labels.resize(ds.n);
    ds.corrupted_flags.assign(ds.n, false);

    Rng rng = Rng(spec.seed).stream("synthetic");
    std::size_t row = 0;
    for (std::size_t c = 0; c < spec.class_count; ++c) {
        // class c centered at separation along coordinate (c mod dim)
        std::size_t axis = c % spec.feature_dim;
        for (std::size_t k = 0; k < spec.per_class_count; ++k, ++row) {
            double* x = ds.features.data() + row * ds.dim;
            for (std::size_t j = 0; j < ds.dim; ++j)
                x[j] = spec.noise_sigma * rng.normal() + (j == axis ? spec.class_center_separation : 0.0);
            ds.observed_labels[row] = c;
            ds.clean_labels[row] = c;
        }
    }
    return ds;
}

Dataset corrupt_symmetric(const Dataset& ds, double r, std::uint64_t seed) {
    if (r < 0.0 || r > 1.0) throw std::invalid_argument("corrupt_symmetric: r outside [0,1]");
    if (ds.class_count < 2 && r > 0.0)
        throw std::invalid_argument("corrupt_symmetric: need at least 2 classes");
    Dataset out = ds;
    Rng rng = Rng(seed).stream("corrupt");
    for (std::size_t i = 0; i < out.n; ++i) {
        if (rng.uniform() < r) {
            // uniform over the C-1 other classes
            std::size_t offset = 1 + rng.below(out.class_count - 1);
            out.observed_labels[i] = (out.clean_labels[i] + offset) % out.class_count;
        } else {
            out.observed_labels[i] = out.clean_labels[i];
        }
        out.corrupted_flags[i] = out.observed_labels[i] != out.clean_labels[i];
    }
    return out;
}

Dataset corrupt_asymmetric(const Dataset& ds,
                           const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                           double r, std::uint64_t seed) {
    if (r < 0.0 || r > 1.0) throw std::invalid_argument("corrupt_asymmetric: r outside [0,1]");
    std::vector<std::size_t> partner(ds.class_count, ds.class_count);  // sentinel: not eligible
    for (auto [a, b] : pairs) {
        if (a >= ds.class_count || b >= ds.class_count || a == b)
            throw std::invalid_argument("corrupt_asymmetric: bad class pair");
        if (partner[a] != ds.class_count || partner[b] != ds.class_count)
            throw std::invalid_argument("corrupt_asymmetric: overlapping pairs");
        partner[a] = b;
        partner[b] = a;
    }
    Dataset out = ds;
    Rng rng = Rng(seed).stream("corrupt");
    for (std::size_t i = 0; i < out.n; ++i) {
        std::size_t cl = out.clean_labels[i];
        out.observed_labels[i] = cl;
        if (partner[cl] != ds.class_count && rng.uniform() < r)
            out.observed_labels[i] = partner[cl];
        out.corrupted_flags[i] = out.observed_labels[i] != cl;
    }
    return out;
}

Dataset corrupt(const Dataset& ds, const CorruptionSpec& spec, std::uint64_t seed) {
    switch (spec.kind) {
        case CorruptionKind::None: return ds;
        case CorruptionKind::Symmetric: return corrupt_symmetric(ds, spec.rate, seed);
        case CorruptionKind::Asymmetric: return corrupt_asymmetric(ds, spec.pairs, spec.rate, seed);
    }
    return ds;
}

namespace {

Dataset take_rows(const Dataset& ds, const std::vector<std::size_t>& rows) {
    Dataset out;
    out.n = rows.size();
    out.dim = ds.dim;
    out.class_count = ds.class_count;
    out.features.reserve(out.n * out.dim);
    for (std::size_t i : rows) {
        auto r = ds.row(i);
        out.features.insert(out.features.end(), r.begin(), r.end());
        out.observed_labels.push_back(ds.observed_labels[i]);
        out.clean_labels.push_back(ds.clean_labels[i]);
        out.corrupted_flags.push_back(ds.corrupted_flags[i]);
    }
    return out;
}

}  // namespace

Dataset subsample_imbalance(const Dataset& ds, const std::vector<std::size_t>& keep_counts,
                            std::uint64_t seed) {
    if (keep_counts.size() != ds.class_count)
        throw std::invalid_argument("subsample_imbalance: keep_counts size != class count");
    std::vector<std::vector<std::size_t>> by_class(ds.class_count);
    for (std::size_t i = 0; i < ds.n; ++i) by_class[ds.clean_labels[i]].push_back(i);

    Rng rng = Rng(seed).stream("subsample");
    std::vector<bool> keep(ds.n, false);
    for (std::size_t c = 0; c < ds.class_count; ++c) {
        auto& idx = by_class[c];
        if (keep_counts[c] > idx.size())
            throw std::invalid_argument("subsample_imbalance: class " + std::to_string(c) +
                                        " has only " + std::to_string(idx.size()) + " examples");
        // Fisher-Yates prefix selection
        for (std::size_t k = 0; k < keep_counts[c]; ++k) {
            std::size_t j = k + rng.below(idx.size() - k);
            std::swap(idx[k], idx[j]);
            keep[idx[k]] = true;
        }
    }
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < ds.n; ++i)
        if (keep[i]) rows.push_back(i);  // original relative order
    return take_rows(ds, rows);
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("split: fraction must be in (0,1)");
    std::vector<std::vector<std::size_t>> by_class(ds.class_count);
    for (std::size_t i = 0; i < ds.n; ++i) by_class[ds.clean_labels[i]].push_back(i);

    Rng rng = Rng(seed).stream("split");
    std::vector<std::size_t> train_rows, val_rows;
    for (std::size_t c = 0; c < ds.class_count; ++c) {
        auto& idx = by_class[c];
        if (idx.size() < 2)
            throw std::invalid_argument("split: class " + std::to_string(c) +
                                        " has fewer than 2 examples");
        // shuffle, then take the first round(n*f) as train
        for (std::size_t k = 0; k + 1 < idx.size(); ++k) {
            std::size_t j = k + rng.below(idx.size() - k);
            std::swap(idx[k], idx[j]);
        }
        std::size_t ntr = static_cast<std::size_t>(
            std::llround(train_fraction * static_cast<double>(idx.size())));
        ntr = std::min(std::max<std::size_t>(ntr, 1), idx.size() - 1);
        train_rows.insert(train_rows.end(), idx.begin(), idx.begin() + ntr);
        val_rows.insert(val_rows.end(), idx.begin() + ntr, idx.end());
    }
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(val_rows.begin(), val_rows.end());
    Dataset train = take_rows(ds, train_rows);
    Dataset val = take_rows(ds, val_rows);
    // trusted validation carries clean labels
    val.observed_labels = val.clean_labels;
    std::fill(val.corrupted_flags.begin(), val.corrupted_flags.end(), false);
    return {std::move(train), std::move(val)};
}

}  // namespace dm
