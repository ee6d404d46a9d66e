#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "ordcast/dataset.hpp"
#include "ordcast/errors.hpp"
#include "support.hpp"

using namespace ordcast;
namespace fs = std::filesystem;

namespace {

fs::path write_text(const fs::path& dir, const std::string& name, const std::string& body) {
    fs::path p = dir / name;
    std::ofstream out(p);
    out << body;
    return p;
}

}  // namespace

TEST_CASE("load_series tolerates one header line and trailing commas") {
    auto dir = testsupport::fresh_dir("ordcast-dataset");
    auto p = write_text(dir, "a.csv", "value\n1.0\n2.5,\n\n 3.5 \n");
    TimeSeries s = load_series(p.string());
    CHECK(s.id == "a");
    CHECK(s.values == std::vector<double>{1.0, 2.5, 3.5});

    TimeSeries named = load_series(p.string(), "other");
    CHECK(named.id == "other");
}

TEST_CASE("load_series rejects junk with its row number") {
    auto dir = testsupport::fresh_dir("ordcast-dataset-bad");

    auto nan_file = write_text(dir, "nan.csv", "1\nnan\n");
    CHECK_THROWS_WITH_AS(load_series(nan_file.string()),
                         doctest::Contains("row 2"), DataError);

    auto junk = write_text(dir, "junk.csv", "h\n1\npotato\n");
    CHECK_THROWS_WITH_AS(load_series(junk.string()),
                         doctest::Contains("row 3"), DataError);

    auto empty = write_text(dir, "empty.csv", "\n\n");
    CHECK_THROWS_WITH_AS(load_series(empty.string()),
                         doctest::Contains("no observations"), DataError);

    CHECK_THROWS_AS(load_series((dir / "missing.csv").string()), DataError);
}

TEST_CASE("save/load round trip preserves doubles exactly") {
    auto dir = testsupport::fresh_dir("ordcast-dataset-rt");
    TimeSeries s{"rt", {0.1, 1.0 / 3.0, -1e-300, 12345.678901234567}};
    auto p = dir / "rt.csv";
    save_series(s, p.string());
    TimeSeries back = load_series(p.string());
    REQUIRE(back.values.size() == s.values.size());
    for (std::size_t i = 0; i < s.values.size(); ++i) CHECK(back.values[i] == s.values[i]);
}

TEST_CASE("make_windows count, alignment and edge cases") {
    std::vector<int> idx(100);
    for (int i = 0; i < 100; ++i) idx[i] = i;

    auto ws = make_windows(idx, 21, 15, 5);
    CHECK(ws.size() == 13);  // (100 - 36) / 5 + 1
    CHECK(ws.front().context.front() == 0);
    CHECK(ws.front().context.back() == 20);
    CHECK(ws.front().target.front() == 21);
    CHECK(ws.front().target.back() == 35);
    CHECK(ws.back().context.front() == 60);
    CHECK(ws.back().target.back() == 95);

    // stride larger than the series: exactly one window
    std::vector<int> ten(10, 1);
    CHECK(make_windows(ten, 5, 5, 100).size() == 1);

    // encoder-only windows
    auto enc_only = make_windows(ten, 4, 0, 2);
    CHECK(enc_only.size() == 4);
    CHECK(enc_only[0].target.empty());

    CHECK_THROWS_WITH_AS(make_windows(ten, 8, 5, 1), doctest::Contains("too short"),
                         DataError);
    CHECK_THROWS_AS(make_windows(ten, 0, 5, 1), std::invalid_argument);
    CHECK_THROWS_AS(make_windows(ten, 5, -1, 1), std::invalid_argument);
    CHECK_THROWS_AS(make_windows(ten, 5, 5, 0), std::invalid_argument);
}

TEST_CASE("split_windows reserves the chronological tail") {
    std::vector<int> idx(30);
    for (int i = 0; i < 30; ++i) idx[i] = i % 3;
    auto ws = make_windows(idx, 2, 1, 3);  // 10 windows
    REQUIRE(ws.size() == 10);

    auto split = split_windows(ws, 0.2);
    CHECK(split.train.size() == 8);
    CHECK(split.validation.size() == 2);
    CHECK(split.validation[0].context == ws[8].context);
    CHECK(split.validation[1].context == ws[9].context);

    // always at least one window on each side
    auto tiny = split_windows(ws, 0.001);
    CHECK(tiny.validation.size() == 1);
    auto fat = split_windows(ws, 0.999);
    CHECK(fat.train.size() == 1);

    CHECK_THROWS_AS(split_windows(ws, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(split_windows({ws[0]}, 0.2), DataError);
}

TEST_CASE("manifest round trip with relative paths") {
    auto dir = testsupport::fresh_dir("ordcast-manifest");
    save_series(TimeSeries{"x", {1, 2, 3}}, (dir / "x.csv").string());
    save_series(TimeSeries{"y", {4, 5, 6}}, (dir / "y.csv").string());

    DatasetManifest man;
    man.m = 42;
    man.seed = 9;
    man.series = {{"x", (dir / "x.csv").string(), SeriesRole::Auxiliary, "train me"},
                  {"y", (dir / "y.csv").string(), SeriesRole::Evaluation, ""}};
    auto mp = dir / "manifest.json";
    save_manifest(man, mp.string());

    DatasetManifest back = load_manifest(mp.string());
    CHECK(back.m == 42);
    CHECK(back.seed == 9);
    REQUIRE(back.series.size() == 2);
    CHECK(back.series[0].id == "x");
    CHECK(back.series[0].role == SeriesRole::Auxiliary);
    CHECK(back.series[0].note == "train me");
    CHECK(back.series[1].role == SeriesRole::Evaluation);
    // paths are stored relative and resolved against the manifest directory
    CHECK(load_series(back.series[0].path).values == std::vector<double>{1, 2, 3});

    CHECK(back.with_role(SeriesRole::Auxiliary).size() == 1);
    CHECK(back.with_role(SeriesRole::Evaluation)[0].id == "y");
}

TEST_CASE("manifest rejects duplicates, bad roles and missing files") {
    auto dir = testsupport::fresh_dir("ordcast-manifest-bad");
    save_series(TimeSeries{"x", {1, 2}}, (dir / "x.csv").string());

    auto dup = write_text(dir, "dup.json", R"({"m":10,"seed":1,"series":[
        {"id":"x","path":"x.csv","role":"auxiliary"},
        {"id":"x","path":"x.csv","role":"evaluation"}]})");
    CHECK_THROWS_WITH_AS(load_manifest(dup.string()), doctest::Contains("duplicate"),
                         DataError);

    auto role = write_text(dir, "role.json", R"({"m":10,"seed":1,"series":[
        {"id":"x","path":"x.csv","role":"test"}]})");
    CHECK_THROWS_WITH_AS(load_manifest(role.string()), doctest::Contains("unknown role"),
                         DataError);

    auto missing = write_text(dir, "missing.json", R"({"m":10,"seed":1,"series":[
        {"id":"z","path":"z.csv","role":"auxiliary"}]})");
    CHECK_THROWS_WITH_AS(load_manifest(missing.string()), doctest::Contains("missing"),
                         DataError);

    auto garbage = write_text(dir, "garbage.json", "not json at all");
    CHECK_THROWS_AS(load_manifest(garbage.string()), DataError);
}
