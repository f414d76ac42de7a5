#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

#include "doctest.h"
#include "fedbba/datamodel.hpp"
#include "fedbba/errors.hpp"

using namespace fedbba;

namespace {

std::vector<std::size_t> all_rows(const ImageDataset& ds) {
    std::vector<std::size_t> rows(ds.size());
    std::iota(rows.begin(), rows.end(), 0);
    return rows;
}

// Hidden unit k scores −|x − t_k|²/2 up to a constant, so the argmax over
// classes is the nearest template.
ModelParams template_memorizer(const Matrix& templates) {
    const std::size_t k = templates.rows();
    const std::size_t d = templates.cols();
    const double s = 0.1;
    MlpLayers l{Matrix(k, d), Vector(k), Matrix::identity(k), Vector(k, 0.0)};
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t p = 0; p < d; ++p) l.w1(c, p) = s * templates(c, p);
        l.b1[c] = -s * dot(templates.row(c), templates.row(c)) / 2.0;
    }
    return flatten(l);
}

} // namespace

TEST_CASE("generate_dataset examples") {
    RngStream rng(1, 0);
    const ImageDataset flat = generate_dataset(4, 10, 8, 8, 0.0, rng);
    for (std::size_t i = 0; i < flat.size(); ++i) {
        const std::size_t first = static_cast<std::size_t>(flat.labels[i]) * 10;
        CHECK(std::equal(flat.images.row(i).begin(), flat.images.row(i).end(), flat.images.row(first).begin()));
    }

    const ImageDataset ds = generate_dataset(4, 50, 8, 8, 0.1, rng);
    CHECK(ds.size() == 200);
    std::vector<int> hist(4, 0);
    for (int l : ds.labels) ++hist[l];
    CHECK(hist == std::vector<int>{50, 50, 50, 50});
    ds.validate();
    for (double v : ds.images.data()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("nearest-template classification is near perfect at sigma 0.1") {
    RngStream rng(2, 0);
    const ImageDataset ds = generate_dataset(4, 250, 8, 8, 0.1, rng);
    const Matrix t = class_templates(4, 8, 8);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        int best = 0;
        double best_d = INFINITY;
        for (std::size_t c = 0; c < 4; ++c) {
            double d = 0.0;
            for (std::size_t p = 0; p < 64; ++p) d += (ds.images(i, p) - t(c, p)) * (ds.images(i, p) - t(c, p));
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(c);
            }
        }
        correct += best == ds.labels[i] ? 1 : 0;
    }
    CHECK(static_cast<double>(correct) / static_cast<double>(ds.size()) >= 0.99);
}

TEST_CASE("class templates are distinct and leave the top row mostly dark") {
    const Matrix t = class_templates(10, 8, 8);
    for (std::size_t a = 0; a < 10; ++a) {
        double lit = 0.0;
        for (std::size_t q = 0; q < 8; ++q) lit += t(a, q);
        CHECK(lit <= 4.0);
    }
    for (std::size_t a = 0; a < 10; ++a)
        for (std::size_t b = a + 1; b < 10; ++b) {
            double d = 0.0;
            for (std::size_t p = 0; p < 64; ++p) d += std::abs(t(a, p) - t(b, p));
            CHECK(d >= 5.0 * 4.0);  // at least five 2×2 blocks differ
        }
    CHECK_THROWS_AS(class_templates(1, 8, 8), InvalidInput);
}

TEST_CASE("partition_noniid examples") {
    RngStream rng(3, 0);
    const ImageDataset ds = generate_dataset(10, 20, 8, 8, 0.1, rng);

    const auto full = partition_noniid(ds, 5, {10, 10}, {3, 3}, rng);
    for (const auto& s : full) CHECK(std::set<int>(s.labels.begin(), s.labels.end()).size() == 10);

    CHECK(partition_noniid(ds, 1, {4, 6}, {2, 4}, rng).size() == 1);

    const auto shards = partition_noniid(ds, 30, {4, 6}, {30, 33}, rng);
    REQUIRE(shards.size() == 30);
    for (const auto& s : shards) {
        const std::size_t k = std::set<int>(s.labels.begin(), s.labels.end()).size();
        CHECK(k >= 4);
        CHECK(k <= 6);
        CHECK(s.size() >= 4 * 30);
        CHECK(s.size() <= 6 * 33);
    }

    CHECK_THROWS_AS(partition_noniid(ds, 3, {4, 11}, {1, 2}, rng), InvalidConfig);
    CHECK_THROWS_AS(partition_noniid(ds, 3, {5, 4}, {1, 2}, rng), InvalidConfig);
    CHECK_THROWS_AS(partition_noniid(ds, 0, {4, 6}, {1, 2}, rng), InvalidConfig);
}

TEST_CASE("train_local with zero learning rate is a fixed point") {
    RngStream rng(4, 0);
    const ImageDataset ds = generate_dataset(10, 5, 8, 8, 0.1, rng);
    const ModelParams m = init_model({64, 32, 10}, rng);
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    CHECK(train_local(m, ds, cfg, rng) == m);
    CHECK_THROWS_AS(train_local(m, ds.subset({}), TrainConfig{}, rng), InvalidInput);
}

TEST_CASE("a separable two-class toy is learned") {
    RngStream rng(5, 0);
    const ImageDataset ds = generate_dataset(2, 50, 4, 4, 0.1, rng);
    const ModelParams start = init_model({16, 32, 2}, rng);
    TrainConfig cfg;
    cfg.epochs = 20;
    const ModelParams trained = train_local(start, ds, cfg, rng);
    CHECK(evaluate(trained, ds) >= 0.95);
}

TEST_CASE("analytic gradient matches central finite differences") {
    RngStream rng(6, 0);
    const ImageDataset ds = generate_dataset(10, 3, 8, 8, 0.1, rng);
    ModelParams m = init_model({64, 32, 10}, rng);
    // Nonzero biases so their gradients are exercised too.
    for (double& v : m.flat) v += 0.05 * rng.normal();
    const auto rows = all_rows(ds);
    const LossGradient g = loss_and_gradient(m, ds, rows);
    const double h = 1e-5;
    for (int t = 0; t < 10; ++t) {
        const std::size_t i = rng.below(m.flat.size());
        ModelParams plus = m, minus = m;
        plus.flat[i] += h;
        minus.flat[i] -= h;
        const double numeric =
            (loss_and_gradient(plus, ds, rows).loss - loss_and_gradient(minus, ds, rows).loss) / (2.0 * h);
        const double scale = std::max({std::abs(numeric), std::abs(g.gradient[i]), 1e-6});
        CHECK(std::abs(numeric - g.gradient[i]) / scale <= 1e-4);
    }
}

TEST_CASE("flatten and unflatten round-trip exactly") {
    RngStream rng(7, 0);
    const ModelParams m = init_model({64, 32, 10}, rng);
    CHECK(flatten(unflatten(m)) == m);
    ModelParams bad = m;
    bad.flat.pop_back();
    CHECK_THROWS_AS(unflatten(bad), InvalidInput);
}

TEST_CASE("training is deterministic for a fixed stream") {
    RngStream d(8, 0);
    const ImageDataset ds = generate_dataset(10, 10, 8, 8, 0.1, d);
    RngStream i(8, 1);
    const ModelParams start = init_model({64, 32, 10}, i);
    RngStream a(8, 2), b(8, 2);
    CHECK(train_local(start, ds, TrainConfig{}, a) == train_local(start, ds, TrainConfig{}, b));
}

TEST_CASE("evaluate examples") {
    RngStream rng(9, 0);
    ImageDataset ds = generate_dataset(4, 10, 8, 8, 0.1, rng);
    ds = ds.subset({0, 1, 2, 10, 11, 20, 30, 31});  // class 0 is 3 of 8

    const ModelParams zeros{{64, 32, 4}, Vector(ModelShape{64, 32, 4}.parameter_count(), 0.0)};
    CHECK(evaluate(zeros, ds) == doctest::Approx(3.0 / 8.0));

    RngStream clean_rng(9, 1);
    const ImageDataset clean = generate_dataset(10, 5, 8, 8, 0.0, clean_rng);
    CHECK(evaluate(template_memorizer(class_templates(10, 8, 8)), clean) == 1.0);

    CHECK_THROWS_AS(evaluate(zeros, ds.subset({})), InvalidInput);
}

TEST_CASE("random initialization averages chance accuracy") {
    RngStream data(10, 0);
    const ImageDataset ds = generate_dataset(10, 20, 8, 8, 0.1, data);
    double total = 0.0;
    const int inits = 100;
    for (int k = 0; k < inits; ++k) {
        RngStream rng(10, 100 + static_cast<std::uint64_t>(k));
        total += evaluate(init_model({64, 32, 10}, rng), ds);
    }
    const double mean_acc = total / inits;
    CHECK(mean_acc >= 0.05);
    CHECK(mean_acc <= 0.15);
}

TEST_CASE("dataset csv round-trips") {
    RngStream rng(11, 0);
    const ImageDataset ds = generate_dataset(3, 4, 4, 4, 0.2, rng);
    const auto path = std::filesystem::temp_directory_path() / "fedbba_dataset_roundtrip.csv";
    write_dataset_csv(ds, path.string());
    const ImageDataset back = read_dataset_csv(path.string(), 4, 4, 3);
    std::filesystem::remove(path);
    CHECK(back.labels == ds.labels);
    CHECK(back.images == ds.images);
}
