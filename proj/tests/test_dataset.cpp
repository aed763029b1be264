#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <bit>
#include <cmath>
#include <fstream>
#include <limits>

#include "support.hpp"
#include "timex/errors.hpp"

using namespace tix;

namespace {

TemporalDataset tiny() {
    return {2, 1, 3, {1, 2, 3, 4, 5, 6}, {0.5, -1.0}, Task::regression, {{"a", FeatureKind::continuous}}};
}

void expect_identical(const TemporalDataset& a, const TemporalDataset& b) {
    REQUIRE(a.num_instances() == b.num_instances());
    REQUIRE(a.num_features() == b.num_features());
    REQUIRE(a.sequence_length() == b.sequence_length());
    CHECK(a.task() == b.task());
    CHECK(a.feature_meta() == b.feature_meta());
    for (std::size_t n = 0; n < a.values().size(); ++n) {
        CHECK(std::bit_cast<std::uint64_t>(a.values()[n]) == std::bit_cast<std::uint64_t>(b.values()[n]));
    }
    for (std::size_t n = 0; n < a.targets().size(); ++n) {
        CHECK(std::bit_cast<std::uint64_t>(a.targets()[n]) == std::bit_cast<std::uint64_t>(b.targets()[n]));
    }
}

}  // namespace

TEST_CASE("indices are 1-based for timesteps") {
    const auto ds = tiny();
    CHECK(ds.at(1, 0, 3) == 6.0);
    CHECK(ds.at(0, 0, 1) == 1.0);
    CHECK(ds.series(1, 0)[1] == 5.0);
    CHECK(ds.feature_index("a") == 0);
    CHECK_THROWS_AS(ds.feature_index("zz"), InvalidArgument);
}

TEST_CASE("dataset invariants") {
    const std::vector<FeatureMeta> meta{{"a", FeatureKind::continuous}};
    CHECK_THROWS_AS(TemporalDataset(1, 1, 1, {1}, {0}, Task::regression, meta), InvariantError);
    CHECK_THROWS_AS(TemporalDataset(0, 1, 1, {}, {}, Task::regression, meta), InvariantError);
    CHECK_THROWS_AS(TemporalDataset(2, 1, 2, {1, 2, 3}, {0, 0}, Task::regression, meta), InvariantError);
    CHECK_THROWS_AS(TemporalDataset(2, 1, 1, {1, 2}, {0}, Task::regression, meta), InvariantError);
    CHECK_THROWS_AS(TemporalDataset(2, 2, 1, {1, 2, 3, 4}, {0, 0}, Task::regression, meta), InvariantError);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(TemporalDataset(2, 1, 1, {1, nan}, {0, 0}, Task::regression, meta), InvariantError);
    CHECK_THROWS_AS(TemporalDataset(2, 1, 1, {1, 2}, {0, INFINITY}, Task::regression, meta), InvariantError);
    CHECK_THROWS_AS(TemporalDataset(2, 1, 1, {1, 2}, {0, 0.5}, Task::classification, meta), InvariantError);
    CHECK_NOTHROW(TemporalDataset(2, 1, 1, {1, 2}, {0, 1}, Task::classification, meta));
}

TEST_CASE("windows") {
    CHECK(Window{3, 7}.width() == 5);
    CHECK(Window::full(8) == Window{1, 8});
    CHECK_NOTHROW(check_window({1, 1}, 1));
    CHECK_THROWS_AS(check_window({0, 2}, 4), InvalidArgument);
    CHECK_THROWS_AS(check_window({3, 2}, 4), InvalidArgument);
    CHECK_THROWS_AS(check_window({2, 5}, 4), InvalidArgument);
}

TEST_CASE("loss values") {
    CHECK(compute_loss(LossKind::quadratic(), 1.0, 0.0) == 1.0);
    CHECK(compute_loss(LossKind::binary_cross_entropy(), 1.0, 1.0) == doctest::Approx(0.0).epsilon(1e-11));
    CHECK(compute_loss(LossKind::binary_cross_entropy(), 1.0, 0.5) == doctest::Approx(0.6931471805599453));
    CHECK(compute_loss(LossKind::binary_cross_entropy(), 0.0, 0.0) >= 0.0);
    CHECK_THROWS_AS(compute_loss(LossKind::quadratic(), NAN, 0.0), InvalidArgument);
    CHECK_THROWS_AS(compute_loss(LossKind::quadratic(), 0.0, INFINITY), InvalidArgument);
}

TEST_CASE("loss properties over random inputs") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> normal(0.0, 3.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const LossKind bce = LossKind::binary_cross_entropy();
    const double cap = -std::log(bce.clamp_epsilon);
    for (int n = 0; n < 2000; ++n) {
        const double t = normal(rng);
        const double o = normal(rng);
        CHECK(compute_loss(LossKind::quadratic(), t, o) >= 0.0);
        CHECK(compute_loss(LossKind::quadratic(), t, t) == 0.0);
        const double label = n % 2;
        const double p = unit(rng);
        const double l = compute_loss(bce, label, p);
        CHECK(l >= 0.0);
        CHECK(l <= cap + 1e-9);
        CHECK(compute_loss(bce, label, label) <= -std::log(1.0 - bce.clamp_epsilon) + 1e-15);
    }
}

TEST_CASE("binary round trip is bit-exact") {
    const auto dir = test_support::temp_dir("binary");
    auto ds = test_support::normal_dataset(7, 3, 5, 99);
    ds = ds.with_targets({0.1, -2.5, 1e-300, 3.0, 0.0, -0.0, 7.125}, Task::regression);
    save_dataset(ds, dir / "d.tds", DatasetFormat::binary);
    expect_identical(ds, load_dataset(dir / "d.tds", DatasetFormat::binary));

    const auto tiny_ds = tiny();
    save_dataset(tiny_ds, dir / "t.tds", DatasetFormat::binary);
    const auto back = load_dataset(dir / "t.tds", DatasetFormat::binary);
    CHECK(back.at(1, 0, 3) == 6.0);
    std::filesystem::remove_all(dir);
}

TEST_CASE("csv round trip is bit-exact") {
    const auto dir = test_support::temp_dir("csv");
    auto ds = test_support::normal_dataset(4, 2, 3, 5, Task::classification);
    save_dataset(ds, dir / "data", DatasetFormat::csv_long);
    expect_identical(ds, load_dataset(dir / "data", DatasetFormat::csv_long));
    std::filesystem::remove_all(dir);
}

TEST_CASE("malformed files are rejected") {
    const auto dir = test_support::temp_dir("bad");
    {
        std::ofstream out(dir / "magic.tds", std::ios::binary);
        out << "NOPE0000000000000000";
    }
    CHECK_THROWS_AS(load_dataset(dir / "magic.tds", DatasetFormat::binary), FormatError);

    const auto ds = tiny();
    save_dataset(ds, dir / "ok.tds", DatasetFormat::binary);
    const auto size = std::filesystem::file_size(dir / "ok.tds");
    std::filesystem::resize_file(dir / "ok.tds", size - 10);
    CHECK_THROWS_AS(load_dataset(dir / "ok.tds", DatasetFormat::binary), FormatError);

    save_dataset(ds, dir / "csv", DatasetFormat::csv_long);
    {
        std::ifstream in(dir / "csv" / "values.csv");
        std::vector<std::string> lines;
        std::string line;
        while (std::getline(in, line)) lines.push_back(line);
        in.close();
        std::ofstream out(dir / "csv" / "values.csv");
        for (std::size_t n = 0; n + 1 < lines.size(); ++n) out << lines[n] << '\n';
    }
    CHECK_THROWS_AS(load_dataset(dir / "csv", DatasetFormat::csv_long), FormatError);

    {
        std::ofstream out(dir / "csv" / "values.csv", std::ios::app);
        out << "1,a,3,nan\n";
    }
    CHECK_THROWS(load_dataset(dir / "csv", DatasetFormat::csv_long));

    CHECK_THROWS_AS(load_dataset(dir / "missing.tds", DatasetFormat::binary), IoError);
    CHECK_THROWS_AS(save_dataset(ds, "", DatasetFormat::binary), IoError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("head and with_targets") {
    const auto ds = test_support::normal_dataset(10, 2, 3, 1);
    const auto h = ds.head(4);
    CHECK(h.num_instances() == 4);
    CHECK(h.at(3, 1, 2) == ds.at(3, 1, 2));
    CHECK_THROWS_AS(ds.head(11), InvalidArgument);
    const auto c = ds.with_targets(std::vector<double>(10, 1.0), Task::classification);
    CHECK(c.task() == Task::classification);
    CHECK(c.values() == ds.values());
}
