#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "dm/data.hpp"

using namespace dm;
namespace fs = std::filesystem;

namespace {

fs::path tmp_file(const std::string& name) {
    return fs::temp_directory_path() / name;
}

Dataset tiny_dataset() {
    Dataset ds;
    ds.n = 4;
    ds.dim = 2;
    ds.class_count = 2;
    ds.features = {0.0, 0.1, 1.0, 1.1, 2.0, 2.1, 3.0, 3.1};
    ds.observed_labels = {0, 1, 0, 1};
    ds.clean_labels = {0, 1, 0, 1};
    ds.corrupted_flags = {false, false, false, false};
    return ds;
}

}  // namespace

TEST_CASE("csv: hand-written file loads with matching values") {
    auto path = tmp_file("dm_test_small.csv");
    {
        std::ofstream out(path);
        out << "label,f0,f1\n0,1.5,-2.0\n1,0.25,0.75\n0,3,4\n";
    }
    Dataset ds = load_csv(path.string(), 2);
    CHECK(ds.n == 3);
    CHECK(ds.dim == 2);
    CHECK(ds.observed_labels == std::vector<std::size_t>{0, 1, 0});
    CHECK(ds.features[0] == doctest::Approx(1.5));
    CHECK(ds.features[3] == doctest::Approx(0.75));
    for (bool f : ds.corrupted_flags) CHECK_FALSE(f);
    fs::remove(path);
}

TEST_CASE("csv: label out of range names the line") {
    auto path = tmp_file("dm_test_badlabel.csv");
    {
        std::ofstream out(path);
        out << "label,f0\n0,1.0\n7,2.0\n";
    }
    CHECK_THROWS_WITH_AS(load_csv(path.string(), 2), doctest::Contains("line 3"),
                         std::runtime_error);
    fs::remove(path);
}

TEST_CASE("csv: malformed row names the line") {
    auto path = tmp_file("dm_test_badrow.csv");
    {
        std::ofstream out(path);
        out << "label,f0\n0,1.0\nnotanumber,2.0\n";
    }
    CHECK_THROWS_WITH_AS(load_csv(path.string(), 2), doctest::Contains("line 3"),
                         std::runtime_error);
    fs::remove(path);
}

TEST_CASE("dmbin: round trip is bit-identical in f32 feature space") {
    SyntheticSpec spec;
    spec.per_class_count = 50;
    spec.feature_dim = 5;
    spec.seed = 3;
    Dataset ds = gen_synthetic(spec);
    ds = corrupt_symmetric(ds, 0.3, 99);

    auto path = tmp_file("dm_test_roundtrip.dmbin");
    save_dmbin(ds, path.string());
    Dataset back = load_dmbin(path.string());
    CHECK(back.n == ds.n);
    CHECK(back.observed_labels == ds.observed_labels);
    CHECK(back.clean_labels == ds.clean_labels);
    CHECK(back.corrupted_flags == ds.corrupted_flags);
    for (std::size_t i = 0; i < ds.features.size(); ++i)
        CHECK(static_cast<float>(back.features[i]) == static_cast<float>(ds.features[i]));

    // second save/load is bit-stable
    auto path2 = tmp_file("dm_test_roundtrip2.dmbin");
    save_dmbin(back, path2.string());
    Dataset back2 = load_dmbin(path2.string());
    CHECK(back2.features == back.features);
    fs::remove(path);
    fs::remove(path2);
}

TEST_CASE("gen_synthetic: seed determinism") {
    SyntheticSpec spec;
    spec.seed = 11;
    spec.per_class_count = 20;
    spec.feature_dim = 4;
    Dataset a = gen_synthetic(spec);
    Dataset b = gen_synthetic(spec);
    CHECK(a.features == b.features);
    spec.seed = 12;
    Dataset c = gen_synthetic(spec);
    CHECK(a.features != c.features);
}

TEST_CASE("gen_synthetic: nearest-centroid accuracy matches the generating law") {
    // separation 4, sigma 1, two classes: the between-centers distance is
    // 4*sqrt(2), so a centroid rule errs with prob Phi(-2*sqrt(2)) ~ 0.0023.
    SyntheticSpec spec;
    spec.class_count = 2;
    spec.per_class_count = 5000;
    spec.feature_dim = 50;
    spec.class_center_separation = 4.0;
    spec.noise_sigma = 1.0;
    spec.seed = 21;
    Dataset ds = gen_synthetic(spec);

    std::vector<double> c0(ds.dim, 0.0), c1(ds.dim, 0.0);
    std::size_t n0 = 0, n1 = 0;
    for (std::size_t i = 0; i < ds.n; ++i) {
        auto row = ds.row(i);
        if (ds.clean_labels[i] == 0) {
            ++n0;
            for (std::size_t j = 0; j < ds.dim; ++j) c0[j] += row[j];
        } else {
            ++n1;
            for (std::size_t j = 0; j < ds.dim; ++j) c1[j] += row[j];
        }
    }
    for (std::size_t j = 0; j < ds.dim; ++j) {
        c0[j] /= n0;
        c1[j] /= n1;
    }
    std::size_t hit = 0;
    for (std::size_t i = 0; i < ds.n; ++i) {
        auto row = ds.row(i);
        double d0 = 0.0, d1 = 0.0;
        for (std::size_t j = 0; j < ds.dim; ++j) {
            d0 += (row[j] - c0[j]) * (row[j] - c0[j]);
            d1 += (row[j] - c1[j]) * (row[j] - c1[j]);
        }
        std::size_t label = d0 <= d1 ? 0 : 1;
        if (label == ds.clean_labels[i]) ++hit;
    }
    CHECK(static_cast<double>(hit) / ds.n > 0.97);
}

TEST_CASE("corrupt_symmetric: trivial rates and binomial concentration") {
    Dataset ds = tiny_dataset();
    Dataset same = corrupt_symmetric(ds, 0.0, 5);
    CHECK(same.observed_labels == ds.observed_labels);
    for (bool f : same.corrupted_flags) CHECK_FALSE(f);

    Dataset flipped = corrupt_symmetric(ds, 1.0, 5);
    for (std::size_t i = 0; i < ds.n; ++i) {
        CHECK(flipped.observed_labels[i] != ds.clean_labels[i]);
        CHECK(flipped.corrupted_flags[i]);
    }

    SyntheticSpec spec;
    spec.per_class_count = 50000;
    spec.feature_dim = 2;
    spec.seed = 1;
    Dataset big = gen_synthetic(spec);
    Dataset bigc = corrupt_symmetric(big, 0.4, 77);
    std::size_t flips = 0;
    for (bool f : bigc.corrupted_flags)
        if (f) ++flips;
    double frac = static_cast<double>(flips) / bigc.n;
    double sigma = std::sqrt(0.4 * 0.6 / bigc.n);
    CHECK(std::abs(frac - 0.4) < 3.0 * sigma);
    // features untouched
    CHECK(bigc.features == big.features);
}

TEST_CASE("corrupt_symmetric: never flips to the clean label") {
    SyntheticSpec spec;
    spec.class_count = 4;
    spec.per_class_count = 2000;
    spec.feature_dim = 2;
    spec.seed = 2;
    Dataset ds = corrupt_symmetric(gen_synthetic(spec), 0.9, 8);
    for (std::size_t i = 0; i < ds.n; ++i)
        if (ds.corrupted_flags[i]) CHECK(ds.observed_labels[i] != ds.clean_labels[i]);
    Dataset one = tiny_dataset();
    one.class_count = 1;
    one.observed_labels = {0, 0, 0, 0};
    one.clean_labels = {0, 0, 0, 0};
    CHECK_THROWS_AS(corrupt_symmetric(one, 0.5, 1), std::invalid_argument);
}

TEST_CASE("corrupt_asymmetric: eligibility and coverage rate") {
    SyntheticSpec spec;
    spec.class_count = 10;
    spec.per_class_count = 10000;
    spec.feature_dim = 2;
    spec.seed = 4;
    Dataset ds = gen_synthetic(spec);
    Dataset cor = corrupt_asymmetric(ds, {{0, 1}}, 0.4, 13);

    std::size_t flips = 0;
    for (std::size_t i = 0; i < cor.n; ++i) {
        if (cor.clean_labels[i] >= 2) CHECK(cor.observed_labels[i] == cor.clean_labels[i]);
        if (cor.corrupted_flags[i]) {
            ++flips;
            CHECK(cor.observed_labels[i] == (cor.clean_labels[i] == 0 ? 1 : 0));
        }
    }
    // overall rate ~ r * coverage = 0.4 * 0.2 = 0.08
    double frac = static_cast<double>(flips) / cor.n;
    double sigma = std::sqrt(0.08 * 0.92 / cor.n);
    CHECK(std::abs(frac - 0.08) < 3.0 * sigma);

    Dataset same = corrupt_asymmetric(ds, {{0, 1}}, 0.0, 13);
    CHECK(same.observed_labels == ds.observed_labels);

    CHECK_THROWS_AS(corrupt_asymmetric(ds, {{0, 1}, {1, 2}}, 0.1, 1), std::invalid_argument);
}

TEST_CASE("subsample_imbalance: identity, ratio, determinism") {
    SyntheticSpec spec;
    spec.per_class_count = 1000;
    spec.feature_dim = 2;
    spec.seed = 6;
    Dataset ds = gen_synthetic(spec);

    Dataset all = subsample_imbalance(ds, {1000, 1000}, 9);
    CHECK(all.n == ds.n);
    CHECK(all.features == ds.features);

    Dataset imb = subsample_imbalance(ds, {1000, 100}, 9);
    CHECK(imb.n == 1100);
    std::size_t neg = 0;
    for (std::size_t l : imb.clean_labels)
        if (l == 1) ++neg;
    CHECK(neg == 100);

    Dataset imb2 = subsample_imbalance(ds, {1000, 100}, 9);
    CHECK(imb.features == imb2.features);

    CHECK_THROWS_WITH_AS(subsample_imbalance(ds, {1001, 100}, 9), doctest::Contains("class 0"),
                         std::invalid_argument);
}

TEST_CASE("split: stratified counts, disjoint cover, clean validation") {
    SyntheticSpec spec;
    spec.per_class_count = 500;
    spec.feature_dim = 2;
    spec.seed = 10;
    Dataset ds = corrupt_symmetric(gen_synthetic(spec), 0.4, 44);
    // corrupt after split in the harness; here corrupt first to verify the
    // validation side reverts to clean labels
    auto [train, val] = split(ds, 0.8, 3);
    CHECK(train.n == 800);
    CHECK(val.n == 200);

    std::size_t per_class_train = 0;
    for (std::size_t l : train.clean_labels)
        if (l == 0) ++per_class_train;
    CHECK(per_class_train == 400);

    for (std::size_t i = 0; i < val.n; ++i) {
        CHECK_FALSE(val.corrupted_flags[i]);
        CHECK(val.observed_labels[i] == val.clean_labels[i]);
    }

    CHECK(train.n + val.n == ds.n);
    // disjointness via feature multiset size: every original row appears once
    std::vector<double> seen;
    seen.insert(seen.end(), train.features.begin(), train.features.end());
    seen.insert(seen.end(), val.features.begin(), val.features.end());
    std::sort(seen.begin(), seen.end());
    std::vector<double> orig = ds.features;
    std::sort(orig.begin(), orig.end());
    CHECK(seen == orig);
}
