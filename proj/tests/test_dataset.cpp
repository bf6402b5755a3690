#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <tuple>

#include "trajkit/dataset.hpp"

using namespace trajkit;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("trajkit_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

using Row = std::tuple<std::string, double, double>;

std::multiset<Row> row_multiset(const TrajectoryDataset& ds) {
    std::multiset<Row> rows;
    for (const auto& s : ds.subjects)
        for (std::size_t j = 0; j < s.n_obs(); ++j) rows.insert({s.id, s.times[j], s.responses[j]});
    return rows;
}

} // namespace

TEST_CASE("load_csv groups, sorts, and preserves row count") {
    TempDir dir;
    const auto path = dir.file("a.csv");
    write_text_file(path,
                    "id,time,response,true_group\n"
                    "2,5,110,1\n"
                    "1,3,120,2\n"
                    "1,1,118,2\n"
                    "2,-4,140,1\n"
                    "10,0,130,1\n");
    const auto ds = load_csv(path, "id", "time", "response", std::optional<std::string>("true_group"));
    REQUIRE(ds.n_subjects() == 3);
    REQUIRE(ds.n_rows() == 5);
    REQUIRE(ds.has_truth);
    // numeric id ordering: 1, 2, 10
    REQUIRE(ds.subjects[0].id == "1");
    REQUIRE(ds.subjects[1].id == "2");
    REQUIRE(ds.subjects[2].id == "10");
    // sorted by time within subject
    REQUIRE(ds.subjects[0].times == std::vector<double>{1.0, 3.0});
    REQUIRE(ds.subjects[1].times == std::vector<double>{-4.0, 5.0});
    REQUIRE(ds.subjects[1].truth_group.value() == 1);
    REQUIRE(ds.t_min == -4.0);
    REQUIRE(ds.t_max == 5.0);
}

TEST_CASE("single-subject single-row file loads") {
    TempDir dir;
    const auto path = dir.file("one.csv");
    write_text_file(path, "id,time,response\n1,0,120\n");
    const auto ds = load_csv(path);
    REQUIRE(ds.n_subjects() == 1);
    REQUIRE(ds.subjects[0].n_obs() == 1);
    REQUIRE_FALSE(ds.has_truth);
}

TEST_CASE("shuffled rows produce the same dataset as sorted rows") {
    TempDir dir;
    const auto sorted = dir.file("sorted.csv");
    const auto shuffled = dir.file("shuffled.csv");
    write_text_file(sorted,
                    "id,time,response\n"
                    "1,1,10\n1,2,11\n1,3,12\n"
                    "2,1,20\n2,2,21\n"
                    "3,5,30\n");
    write_text_file(shuffled,
                    "id,time,response\n"
                    "3,5,30\n2,2,21\n1,2,11\n"
                    "1,1,10\n2,1,20\n1,3,12\n");
    const auto a = load_csv(sorted);
    const auto b = load_csv(shuffled);
    REQUIRE(a.n_subjects() == b.n_subjects());
    for (std::size_t i = 0; i < a.subjects.size(); ++i) {
        REQUIRE(a.subjects[i].id == b.subjects[i].id);
        REQUIRE(a.subjects[i].times == b.subjects[i].times);
        REQUIRE(a.subjects[i].responses == b.subjects[i].responses);
    }
}

TEST_CASE("tab-delimited files are auto-detected") {
    TempDir dir;
    const auto path = dir.file("tabs.tsv");
    write_text_file(path, "id\ttime\tresponse\n1\t0\t120\n1\t1\t121\n");
    const auto ds = load_csv(path);
    REQUIRE(ds.n_rows() == 2);
}

TEST_CASE("gzip round-trip preserves the row multiset") {
    TempDir dir;
    TrajectoryDataset ds;
    ds.subjects.push_back({"7", {0.5, 1.25, 1.25}, {100.0, 101.5, 99.75}, std::nullopt});
    ds.subjects.push_back({"3", {-2.0}, {130.0}, std::nullopt});
    ds.has_truth = false;
    detail::finalize_dataset(ds);

    const auto path = dir.file("round.csv.gz");
    write_csv(ds, path);
    const auto back = load_csv(path);
    REQUIRE(row_multiset(back) == row_multiset(ds));
    REQUIRE(back.n_rows() == ds.n_rows());
}

TEST_CASE("duplicate (id,time) rows stay distinct, input order kept") {
    TempDir dir;
    const auto path = dir.file("dup.csv");
    write_text_file(path, "id,time,response\n1,2,5\n1,2,6\n1,1,4\n");
    const auto ds = load_csv(path);
    REQUIRE(ds.subjects[0].times == std::vector<double>{1.0, 2.0, 2.0});
    REQUIRE(ds.subjects[0].responses == std::vector<double>{4.0, 5.0, 6.0});
}

TEST_CASE("schema and parse errors identify the problem") {
    TempDir dir;
    const auto path = dir.file("bad.csv");

    SECTION("missing column") {
        write_text_file(path, "id,when,response\n1,0,120\n");
        try {
            load_csv(path);
            FAIL("expected SchemaError");
        } catch (const SchemaError& e) {
            REQUIRE(std::string(e.what()).find("time") != std::string::npos);
        }
    }

    SECTION("non-numeric cell reports the line") {
        write_text_file(path, "id,time,response\n1,0,120\n1,oops,121\n");
        try {
            load_csv(path);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            REQUIRE(std::string(e.what()).find("line 3") != std::string::npos);
        }
    }

    SECTION("blank response is a hard error") {
        write_text_file(path, "id,time,response\n1,0,\n");
        REQUIRE_THROWS_AS(load_csv(path), ParseError);
    }

    SECTION("non-finite values are rejected") {
        write_text_file(path, "id,time,response\n1,0,inf\n");
        REQUIRE_THROWS_AS(load_csv(path), ParseError);
    }

    SECTION("zero data rows") {
        write_text_file(path, "id,time,response\n");
        REQUIRE_THROWS_AS(load_csv(path), EmptyInputError);
    }
}

TEST_CASE("row count equals the sum of per-subject observation counts") {
    TempDir dir;
    const auto path = dir.file("sum.csv");
    std::string text = "id,time,response\n";
    int rows = 0;
    for (int id = 1; id <= 13; ++id)
        for (int j = 0; j <= id % 5; ++j) {
            text += std::to_string(id) + "," + std::to_string(j) + ",100\n";
            ++rows;
        }
    write_text_file(path, text);
    const auto ds = load_csv(path);
    std::size_t total = 0;
    for (const auto& s : ds.subjects) total += s.n_obs();
    REQUIRE(total == static_cast<std::size_t>(rows));
    REQUIRE(ds.n_rows() == static_cast<std::size_t>(rows));
}

TEST_CASE("validate_for_clustering warns on small or ill-supported data") {
    TrajectoryDataset ds;
    for (int i = 0; i < 10; ++i)
        ds.subjects.push_back({std::to_string(i), {0.0, 1.0, 2.0}, {1.0, 2.0, 3.0}, std::nullopt});
    detail::finalize_dataset(ds);

    const auto w1 = validate_for_clustering(ds, 20, 2);
    REQUIRE(w1.size() == 1);
    REQUIRE(w1[0].find("fewer subjects than clusters") != std::string::npos);

    const auto w2 = validate_for_clustering(ds, 2, 30);
    REQUIRE(w2.size() == 1);
    REQUIRE(w2[0].find("insufficient distinct times") != std::string::npos);

    const auto ok = validate_for_clustering(ds, 2, 2);
    REQUIRE(ok.empty());
}

TEST_CASE("cohort filter keeps subjects meeting pre/post minima") {
    TrajectoryDataset ds;
    ds.subjects.push_back({"1", {-10.0, 1.0, 2.0, 3.0}, {1, 1, 1, 1}, std::nullopt}); // keeps
    ds.subjects.push_back({"2", {1.0, 2.0, 3.0}, {1, 1, 1}, std::nullopt});           // no pre
    ds.subjects.push_back({"3", {-5.0, 1.0, 2.0}, {1, 1, 1}, std::nullopt});          // few post
    detail::finalize_dataset(ds);
    const auto kept = filter_min_obs(ds, 1, 3);
    REQUIRE(kept.n_subjects() == 1);
    REQUIRE(kept.subjects[0].id == "1");
}
