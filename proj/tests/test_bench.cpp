#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "bmmp/bench.hpp"
#include "bmmp/pgm.hpp"

using bmmp::ExperimentConfig;
using bmmp::GrayImage;
using bmmp::GridPoint;
using bmmp::MetricsSummary;
using bmmp::SignalPrior;
using bmmp::SolverSpec;
using bmmp::TrialRecord;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) : path("/tmp/bmmp_bench_" + name) {}
    ~TempFile() { std::remove(path.c_str()); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

ExperimentConfig tiny_config() {
    ExperimentConfig config;
    config.experiment = "unit";
    config.grid = {GridPoint{16, 32, 3, std::nullopt}};
    config.solvers = {SolverSpec{"omp", "", {}, {}, {}}};
    config.trials = 1;
    config.seed_base = 9;
    config.prior = SignalPrior{0.0, 1.0};
    return config;
}

}  // namespace

TEST_CASE("run_experiment counts and determinism") {
    auto config = tiny_config();
    const auto one = bmmp::run_experiment(config);
    REQUIRE(one.size() == 1);
    CHECK(one[0].solver == "omp");
    CHECK_FALSE(one[0].skipped);

    config.grid.push_back(GridPoint{16, 32, 5, std::nullopt});
    config.solvers.push_back(SolverSpec{"bmmp", "", {}, {}, {}});
    config.trials = 3;
    const auto a = bmmp::run_experiment(config);
    const auto b = bmmp::run_experiment(config);
    REQUIRE(a.size() == 2 * 2 * 3);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].solver == b[i].solver);
        CHECK(a[i].trial_seed == b[i].trial_seed);
        CHECK(a[i].exact == b[i].exact);
        CHECK(a[i].sq_error == b[i].sq_error);
    }

    // parallel run produces the same records as serial
    auto parallel = config;
    parallel.jobs = 4;
    const auto c = bmmp::run_experiment(parallel);
    REQUIRE(c.size() == a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].sq_error == c[i].sq_error);
        CHECK(a[i].exact == c[i].exact);
    }
}

TEST_CASE("infeasible grid points are skipped, not fatal") {
    auto config = tiny_config();
    // cosamp needs 3k <= m: 3*7 > 16
    config.grid = {GridPoint{16, 32, 7, std::nullopt}};
    config.solvers = {SolverSpec{"cosamp", "", {}, {}, {}},
                      SolverSpec{"omp", "", {}, {}, {}}};
    config.trials = 2;
    const auto records = bmmp::run_experiment(config);
    REQUIRE(records.size() == 4);
    int skipped = 0;
    for (const auto& r : records)
        skipped += r.skipped ? 1 : 0;
    CHECK(skipped == 2);

    const auto summaries = bmmp::aggregate(records);
    for (const auto& s : summaries)
        CHECK(s.solver != "cosamp");  // skipped records never aggregate
}

TEST_CASE("noiseless exact recovery implies tiny squared error") {
    auto config = tiny_config();
    config.grid = {GridPoint{32, 64, 5, std::nullopt}};
    config.solvers = {SolverSpec{"bmmp", "", {}, {}, {}}};
    config.trials = 20;
    for (const auto& r : bmmp::run_experiment(config)) {
        if (r.exact)
            CHECK(r.sq_error <= 1e-12);
        else
            CHECK(r.sq_error > 1e-12);
    }
}

TEST_CASE("aggregate rates, Wilson interval, and permutation stability") {
    std::vector<TrialRecord> records;
    for (int i = 0; i < 10; ++i) {
        TrialRecord r;
        r.experiment = "unit";
        r.solver = "omp";
        r.m = 16;
        r.n = 32;
        r.k = 3;
        r.trial = i;
        r.exact = i < 7;
        r.sq_error = 0.5;
        records.push_back(r);
    }
    auto summaries = bmmp::aggregate(records);
    REQUIRE(summaries.size() == 1);
    CHECK(summaries[0].trial_count == 10);
    CHECK(summaries[0].recovery_rate == doctest::Approx(0.7));
    CHECK(summaries[0].mse == doctest::Approx(0.5));

    // Wilson half-width for a single success
    std::vector<TrialRecord> single(records.begin(), records.begin() + 1);
    const auto lone = bmmp::aggregate(single);
    REQUIRE(lone.size() == 1);
    const double z = 1.959963984540054;
    const double n = 1.0, p = 1.0;
    const double center = (p + z * z / (2 * n)) / (1 + z * z / n);
    const double half =
        z * std::sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / (1 + z * z / n);
    CHECK(lone[0].recovery_rate == 1.0);
    CHECK(lone[0].ci95_half_width == doctest::Approx(half));
    CHECK(center - half >= 0.0);  // interval stays inside [0, 1]

    std::mt19937 gen(3);
    std::shuffle(records.begin(), records.end(), gen);
    const auto shuffled = bmmp::aggregate(records);
    REQUIRE(shuffled.size() == 1);
    CHECK(shuffled[0].recovery_rate == summaries[0].recovery_rate);
    CHECK(shuffled[0].mse == summaries[0].mse);

    CHECK(bmmp::aggregate({}).empty());
}

TEST_CASE("format_double round-trips") {
    for (double v : {0.0, 1.0, 0.1, -2.5e-7, 1.0 / 3.0, 12345.678901234567}) {
        CHECK(std::stod(bmmp::format_double(v)) == v);
    }
    CHECK(bmmp::format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
    CHECK(bmmp::format_double(std::numeric_limits<double>::infinity()) == "inf");
}

TEST_CASE("records CSV round trip") {
    auto config = tiny_config();
    config.grid = {GridPoint{16, 32, 3, 25.0}};
    config.trials = 4;
    const auto records = bmmp::run_experiment(config);

    TempFile file("records.csv");
    bmmp::write_records_csv(file.path, records);
    const auto back = bmmp::read_records_csv(file.path);
    REQUIRE(back.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(back[i].solver == records[i].solver);
        CHECK(back[i].m == records[i].m);
        CHECK(back[i].snr_db == records[i].snr_db);
        CHECK(back[i].trial_seed == records[i].trial_seed);
        CHECK(back[i].exact == records[i].exact);
        CHECK(back[i].sq_error == records[i].sq_error);
        CHECK(back[i].iterations == records[i].iterations);
        CHECK(back[i].wall_time_s == 0.0);  // timing lives only in the JSON output
    }

    // header-only file round-trips to empty
    TempFile empty("empty.csv");
    bmmp::write_records_csv(empty.path, {});
    CHECK(bmmp::read_records_csv(empty.path).empty());

    // refusing to clobber
    CHECK_THROWS_AS(bmmp::write_records_csv(file.path, records, false), std::runtime_error);

    // wrong header
    {
        std::ofstream out(file.path);
        out << "bogus,header\n";
    }
    CHECK_THROWS_AS(bmmp::read_records_csv(file.path), std::runtime_error);
}

TEST_CASE("summaries CSV round trip") {
    auto config = tiny_config();
    config.trials = 5;
    const auto summaries = bmmp::aggregate(bmmp::run_experiment(config));
    REQUIRE_FALSE(summaries.empty());

    TempFile file("summary.csv");
    bmmp::write_summaries_csv(file.path, summaries);
    const auto back = bmmp::read_summaries_csv(file.path);
    REQUIRE(back.size() == summaries.size());
    for (std::size_t i = 0; i < summaries.size(); ++i) {
        CHECK(back[i].solver == summaries[i].solver);
        CHECK(back[i].recovery_rate == summaries[i].recovery_rate);
        CHECK(back[i].ci95_half_width == summaries[i].ci95_half_width);
        CHECK(back[i].mse == summaries[i].mse);
        CHECK(back[i].trial_count == summaries[i].trial_count);
    }
}

TEST_CASE("plot data layout, nan cells, and duplicate detection") {
    std::vector<MetricsSummary> summaries;
    for (int k : {8, 16, 24}) {
        for (const char* solver : {"bmmp", "omp"}) {
            if (k == 24 && std::string(solver) == "omp")
                continue;  // missing point becomes nan
            MetricsSummary s;
            s.solver = solver;
            s.m = 64;
            s.n = 128;
            s.k = k;
            s.trial_count = 10;
            s.recovery_rate = k / 100.0 + (std::string(solver) == "bmmp" ? 0.5 : 0.25);
            summaries.push_back(s);
        }
    }

    TempFile file("plot.dat");
    bmmp::emit_plot_data(file.path, summaries, bmmp::PlotAxis::K,
                         bmmp::PlotValue::RecoveryRate, {"bmmp", "omp"});
    std::ifstream in(file.path);
    std::string header;
    std::getline(in, header);
    CHECK(header.find("bmmp") != std::string::npos);
    CHECK(header.find("omp") != std::string::npos);
    CHECK(header[0] == '#');

    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream fields(line);
        std::vector<std::string> row;
        std::string f;
        while (fields >> f)
            row.push_back(f);
        rows.push_back(row);
    }
    REQUIRE(rows.size() == 3);
    for (const auto& row : rows)
        REQUIRE(row.size() == 3);  // x + 2 solvers
    CHECK(rows[0][0] == "8");
    CHECK(rows[2][0] == "24");
    CHECK(std::stod(rows[0][1]) == doctest::Approx(0.58));
    CHECK(rows[2][2] == "nan");

    summaries.push_back(summaries[0]);  // duplicate grid point
    CHECK_THROWS_AS(bmmp::emit_plot_data(file.path, summaries, bmmp::PlotAxis::K,
                                         bmmp::PlotValue::RecoveryRate, {"bmmp", "omp"}),
                    std::runtime_error);
}

TEST_CASE("preset grids") {
    const auto fig3 = bmmp::preset_config("fig3", 0.5, 10, 1);
    REQUIRE_FALSE(fig3.grid.empty());
    for (const auto& p : fig3.grid) {
        CHECK(p.n == 2 * p.m);
        CHECK(p.k == static_cast<int>(p.m / 1.8));
        CHECK_FALSE(p.snr_db.has_value());
    }
    CHECK(fig3.solvers.size() == 2);
    CHECK(fig3.solvers[0].display() != fig3.solvers[1].display());

    const auto fig2a = bmmp::preset_config("fig2a", 0.5, 10, 1);
    for (const auto& p : fig2a.grid) {
        CHECK(p.m == 64);
        CHECK(p.n == 128);
    }
    CHECK(fig2a.solvers.size() == 6);

    const auto fig2c = bmmp::preset_config("fig2c", 0.5, 10, 1);
    for (const auto& p : fig2c.grid)
        CHECK(p.snr_db.has_value());
    CHECK(fig2c.prior.a == doctest::Approx(0.1));

    const auto fig2d = bmmp::preset_config("fig2d", 0.5, 10, 1);
    CHECK(fig2d.solvers.size() == 4);

    CHECK_THROWS_AS(bmmp::preset_config("fig9", 1.0, 10, 1), std::invalid_argument);
    CHECK(bmmp::preset_names().size() == 4);
}

TEST_CASE("pgm round trip and format errors") {
    GrayImage img;
    img.width = 5;
    img.height = 3;
    img.pixels.resize(15);
    for (int i = 0; i < 15; ++i)
        img.pixels[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i * 17);

    TempFile file("img.pgm");
    bmmp::write_pgm(file.path, img);
    const auto back = bmmp::read_pgm(file.path);
    CHECK(back.width == img.width);
    CHECK(back.height == img.height);
    CHECK(back.pixels == img.pixels);

    // comments in the header are tolerated
    {
        std::ofstream out(file.path, std::ios::binary);
        out << "P5\n# a comment\n2 2\n255\n";
        out.put(0).put(50).put(100).put(200);
    }
    const auto commented = bmmp::read_pgm(file.path);
    CHECK(commented.width == 2);
    CHECK(commented.pixels[3] == 200);

    {
        std::ofstream out(file.path, std::ios::binary);
        out << "P2\n2 2\n255\n0 1 2 3\n";
    }
    CHECK_THROWS_AS(bmmp::read_pgm(file.path), std::runtime_error);

    {
        std::ofstream out(file.path, std::ios::binary);
        out << "P5\n2 2\n255\n";
        out.put(0);  // truncated pixel data
    }
    CHECK_THROWS_AS(bmmp::read_pgm(file.path), std::runtime_error);

    {
        std::ofstream out(file.path, std::ios::binary);
        out << "P5\n2 2\n65535\n";
        for (int i = 0; i < 8; ++i)
            out.put(0);
    }
    CHECK_THROWS_AS(bmmp::read_pgm(file.path), std::runtime_error);
}

TEST_CASE("image demo edge cases and determinism") {
    GrayImage zero;
    zero.width = 4;
    zero.height = 4;
    zero.pixels.assign(16, 0);
    const auto blank =
        bmmp::image_demo(zero, 8, std::nullopt, {SolverSpec{"omp", "", {}, {}, {}}}, 3);
    CHECK(blank.k == 0);
    REQUIRE(blank.entries.size() == 1);
    CHECK(blank.entries[0].mse == 0.0);
    CHECK(std::isinf(blank.entries[0].psnr));
    for (double v : blank.entries[0].reconstruction)
        CHECK(v == 0.0);

    GrayImage sparse;
    sparse.width = 4;
    sparse.height = 4;
    sparse.pixels.assign(16, 0);
    sparse.pixels[2] = 200;
    sparse.pixels[9] = 90;
    sparse.pixels[14] = 255;
    const auto rec =
        bmmp::image_demo(sparse, 10, std::nullopt, {SolverSpec{"bmmp", "", {}, {}, {}}}, 4);
    CHECK(rec.k == 3);
    REQUIRE(rec.entries.size() == 1);
    CHECK(rec.entries[0].mse <= 1e-8);
    CHECK(rec.entries[0].display.pixels == sparse.pixels);

    const auto again =
        bmmp::image_demo(sparse, 10, std::nullopt, {SolverSpec{"bmmp", "", {}, {}, {}}}, 4);
    CHECK(again.entries[0].reconstruction == rec.entries[0].reconstruction);

    GrayImage dense;
    dense.width = 4;
    dense.height = 4;
    dense.pixels.assign(16, 255);
    CHECK_THROWS_AS(
        bmmp::image_demo(dense, 8, std::nullopt, {SolverSpec{"omp", "", {}, {}, {}}}, 3),
        std::invalid_argument);
}
