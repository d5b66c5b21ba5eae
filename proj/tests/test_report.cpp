#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <unistd.h>

#include <gtest/gtest.h>

#include "sice/tables.hpp"

using namespace sice;
using namespace sice::report;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Set SICE_UPDATE_GOLDEN=1 to rewrite the files after an intended change.
void expect_golden(const std::string& name, const std::string& actual) {
    const fs::path path = fs::path(SICE_GOLDEN_DIR) / name;
    if (std::getenv("SICE_UPDATE_GOLDEN")) {
        std::ofstream(path, std::ios::binary) << actual;
        GTEST_SKIP() << "rewrote " << path;
    }
    ASSERT_TRUE(fs::exists(path)) << path;
    EXPECT_EQ(read_file(path), actual) << name;
}

fs::path scratch_dir(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("sice_report_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(d);
    return d;
}

const char* kTinyDataset =
    "subject_id,arm,baseline,endpoint\n"
    "a1,control,12,11.5\n"
    "a2,treatment,14,12.0\n"
    "a3,control,15,15.5\n"
    "a4,treatment,17,13.1\n"
    "a5,control,19,18.2\n"
    "a6,treatment,21,15.0\n"
    "a7,control,23,21.9\n"
    "a8,treatment,26,17.4\n"
    "a9,control,28,26.0\n"
    "a10,treatment,31,19.8\n";

}  // namespace

TEST(FormatDouble, ShortestRoundTrip) {
    std::mt19937_64 g(1);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 2000; ++i) {
        const double v = i % 2 ? u(g) : u(g) * 1e-300;
        EXPECT_EQ(std::strtod(format_double(v).c_str(), nullptr), v);
    }
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_EQ(format_double(2.0), "2");
    EXPECT_EQ(format_double(-0.5), "-0.5");
}

TEST(Cells, MissingValuesAndText) {
    EXPECT_EQ(cell_text(num(std::nan(""))), "");
    EXPECT_EQ(cell_text(num(std::numeric_limits<double>::infinity())), "");
    EXPECT_EQ(cell_text(count(42)), "42");
    EXPECT_EQ(cell_text(Cell{true}), "true");
    EXPECT_EQ(cell_number(count(3)).value(), 3.0);
    EXPECT_FALSE(cell_number(text("3")).has_value());
}

TEST(Csv, EscapesOnlyWhenNeeded) {
    EXPECT_EQ(csv_escape("plain"), "plain");
    EXPECT_EQ(csv_escape("a,b"), "\"a,b\"");
    EXPECT_EQ(csv_escape("say \"hi\""), "\"say \"\"hi\"\"\"");
    EXPECT_EQ(csv_escape("two\nlines"), "\"two\nlines\"");
    Table t{"t", {"x", "note"}, {}};
    t.add_row({num(1.5), text("a,b")});
    t.add_row({Cell{}, text("")});
    EXPECT_EQ(to_csv(t), "x,note\n1.5,\"a,b\"\n,\n");
    EXPECT_THROW(t.add_row({num(1.0)}), Error);
    EXPECT_THROW(t.column("missing"), Error);
}

TEST(Json, NullsForMissingAndTypedValues) {
    Table t{"t", {"x", "n", "ok", "label"}, {}};
    t.add_row({num(std::nan("")), count(7), Cell{false}, text("k")});
    const auto j = to_json(t);
    ASSERT_EQ(j.size(), 1u);
    EXPECT_TRUE(j[0]["x"].is_null());
    EXPECT_EQ(j[0]["n"].get<int>(), 7);
    EXPECT_FALSE(j[0]["ok"].get<bool>());
    EXPECT_EQ(j[0]["label"], "k");
    EXPECT_EQ(j[0].begin().key(), "x");
}

TEST(Golden, AnalyticIntroTable) {
    PopulationParams pop;
    pop.control = {0.0, 1.0, 0.2};
    pop.treatment = {0.0, 1.2, 0.3};
    const auto t = analytic_table(pop, {Direction::GreaterThan, 0.6, false}, 1000, 1000, 0.05, 0.0);
    expect_golden("analytic_intro.csv", to_csv(t));
}

TEST(Golden, TinyDatasetSweep) {
    std::istringstream in(kTinyDataset);
    const auto data = load_dataset(in);
    SweepConfig cfg;
    cfg.thresholds = {15, 20, 26};
    const auto t = sweep_table(threshold_sweep(data, cfg));
    EXPECT_EQ(t.rows.size(), 8u);
    expect_golden("sweep_tiny.csv", to_csv(t));
}

TEST(Svg, DrawsSeriesFromTableCells) {
    Table t{"t", {"x", "y", "lo", "hi", "g"}, {}};
    t.add_row({num(2.0), num(1.0), num(0.5), num(1.5), text("a")});
    t.add_row({num(1.0), num(2.0), num(1.5), num(2.5), text("a")});
    t.add_row({num(1.0), num(3.0), Cell{}, Cell{}, text("b & c")});
    t.add_row({num(2.0), Cell{}, Cell{}, Cell{}, text("b & c")});
    ChartSpec spec;
    spec.title = "x < y";
    spec.x_column = "x";
    spec.y_column = "y";
    spec.group_columns = {"g"};
    spec.low_column = "lo";
    spec.high_column = "hi";
    spec.reference_y = 0.0;
    const auto svg = render_svg(t, spec);
    EXPECT_EQ(svg.rfind("<svg", 0), 0u);
    EXPECT_NE(svg.find("</svg>"), std::string::npos);
    EXPECT_NE(svg.find("x &lt; y"), std::string::npos);
    EXPECT_NE(svg.find("g=b &amp; c"), std::string::npos);
    EXPECT_NE(svg.find("stroke-dasharray"), std::string::npos);
    // series a has two points, b keeps only its finite one
    std::size_t polylines = 0, circles = 0;
    for (auto p = svg.find("<polyline"); p != std::string::npos; p = svg.find("<polyline", p + 1)) ++polylines;
    for (auto p = svg.find("<circle"); p != std::string::npos; p = svg.find("<circle", p + 1)) ++circles;
    EXPECT_EQ(polylines, 1u);
    EXPECT_EQ(circles, 3u);

    spec.filter_column = "g";
    spec.filter_value = "a";
    const auto only_a = render_svg(t, spec);
    EXPECT_EQ(only_a.find("b &amp; c"), std::string::npos);
}

TEST(OutputWriter, WritesRequestedFormatsWithoutLeftovers) {
    const auto dir = scratch_dir("ok");
    OutputWriter w(dir / "nested", {Format::Csv, Format::Json});
    Table t{"table", {"x"}, {}};
    t.add_row({num(1.0)});
    w.write_table(t);
    ChartSpec spec;
    spec.x_column = spec.y_column = "x";
    w.write_chart("chart", t, spec);
    EXPECT_EQ(w.written(), (std::vector<std::string>{"table.csv", "table.json"}));
    EXPECT_EQ(read_file(dir / "nested" / "table.csv"), "x\n1\n");
    EXPECT_FALSE(fs::exists(dir / "nested" / "chart.svg"));
    for (const auto& e : fs::directory_iterator(dir / "nested"))
        EXPECT_EQ(e.path().string().find(".partial"), std::string::npos);
    fs::remove_all(dir);
}

TEST(OutputWriter, UnusableDirectoryRaisesIoError) {
    const auto dir = scratch_dir("bad");
    fs::create_directories(dir);
    std::ofstream(dir / "file") << "x";
    EXPECT_THROW(OutputWriter(dir / "file" / "sub", {Format::Csv}), IoError);
    OutputWriter w(dir, {Format::Csv});
    fs::create_directories(dir / "occupied.csv" / "inner");
    // rename onto a non-empty directory fails; the partial file must be cleaned up
    EXPECT_THROW(w.write_file("occupied.csv", "data"), IoError);
    EXPECT_FALSE(fs::exists(dir / "occupied.csv.partial"));
    fs::remove_all(dir);
}
