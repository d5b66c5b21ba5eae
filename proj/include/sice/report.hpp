#pragma once

// Result tables with a fixed column order, rendered to CSV and JSON, and
// SVG line/scatter charts drawn from table columns alone.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <system_error>
#include <variant>
#include <vector>

#include <json.hpp>

#include "sice/errors.hpp"

namespace sice::report {

using Cell = std::variant<std::monostate, double, std::int64_t, std::string, bool>;

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add_row(std::vector<Cell> row) {
        if (row.size() != columns.size())
            throw Error("table " + name + ": row has " + std::to_string(row.size()) + " cells, expected "
                        + std::to_string(columns.size()));
        rows.push_back(std::move(row));
    }

    std::size_t column(const std::string& col) const {
        auto it = std::find(columns.begin(), columns.end(), col);
        if (it == columns.end()) throw Error("table " + name + ": no column " + col);
        return static_cast<std::size_t>(it - columns.begin());
    }
};

inline Cell num(double v) { return std::isfinite(v) ? Cell{v} : Cell{}; }
inline Cell count(std::size_t v) { return Cell{static_cast<std::int64_t>(v)}; }
inline Cell text(std::string v) { return Cell{std::move(v)}; }

/// Shortest decimal that reads back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

inline std::string cell_text(const Cell& c) {
    struct {
        std::string operator()(std::monostate) const { return ""; }
        std::string operator()(double v) const { return format_double(v); }
        std::string operator()(std::int64_t v) const { return std::to_string(v); }
        std::string operator()(const std::string& v) const { return v; }
        std::string operator()(bool v) const { return v ? "true" : "false"; }
    } visitor;
    return std::visit(visitor, c);
}

inline std::optional<double> cell_number(const Cell& c) {
    if (auto d = std::get_if<double>(&c)) return *d;
    if (auto i = std::get_if<std::int64_t>(&c)) return static_cast<double>(*i);
    return std::nullopt;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

inline std::string to_csv(const Table& t) {
    std::string out;
    for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + csv_escape(t.columns[i]);
    out += '\n';
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + csv_escape(cell_text(row[i]));
        out += '\n';
    }
    return out;
}

/// Array of objects keyed by column name; missing values become null.
inline nlohmann::ordered_json to_json(const Table& t) {
    auto rows = nlohmann::ordered_json::array();
    for (const auto& row : t.rows) {
        nlohmann::ordered_json obj = nlohmann::ordered_json::object();
        for (std::size_t i = 0; i < row.size(); ++i) {
            std::visit(
                [&](const auto& v) {
                    using V = std::decay_t<decltype(v)>;
                    if constexpr (std::is_same_v<V, std::monostate>) obj[t.columns[i]] = nullptr;
                    else obj[t.columns[i]] = v;
                },
                row[i]);
        }
        rows.push_back(std::move(obj));
    }
    return rows;
}

//---------------------------------------------------------------------------//
// SVG charts
//---------------------------------------------------------------------------//

struct ChartSpec {
    std::string title;
    std::string x_column;
    std::string y_column;
    std::vector<std::string> group_columns;  ///< one series per distinct combination
    std::string low_column;                  ///< optional error-bar bounds
    std::string high_column;
    bool scatter = false;                    ///< markers only, no polyline
    std::optional<double> reference_y;       ///< horizontal dashed line
    std::string filter_column;               ///< keep rows whose filter_column equals filter_value
    std::string filter_value;
};

namespace detail {

struct Series {
    std::string label;
    std::vector<std::array<double, 4>> points;  // x, y, lo, hi (NaN when absent)
};

inline std::string esc(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

inline std::string coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace detail

/// Renders a chart purely from the table's cells.
inline std::string render_svg(const Table& t, const ChartSpec& spec) {
    const std::size_t xi = t.column(spec.x_column);
    const std::size_t yi = t.column(spec.y_column);
    std::vector<std::size_t> gi;
    for (const auto& g : spec.group_columns) gi.push_back(t.column(g));
    const bool bars = !spec.low_column.empty() && !spec.high_column.empty();
    const std::size_t lo_i = bars ? t.column(spec.low_column) : 0;
    const std::size_t hi_i = bars ? t.column(spec.high_column) : 0;
    const std::size_t fi = spec.filter_column.empty() ? 0 : t.column(spec.filter_column);

    std::map<std::string, detail::Series> groups;
    std::vector<std::string> order;
    for (const auto& row : t.rows) {
        if (!spec.filter_column.empty() && cell_text(row[fi]) != spec.filter_value) continue;
        auto x = cell_number(row[xi]);
        auto y = cell_number(row[yi]);
        if (!x || !y) continue;
        std::string label;
        for (std::size_t k = 0; k < gi.size(); ++k)
            label += (k ? ", " : "") + spec.group_columns[k] + "=" + cell_text(row[gi[k]]);
        if (!groups.count(label)) order.push_back(label);
        auto& s = groups[label];
        s.label = label;
        const double nan = std::nan("");
        double lo = nan, hi = nan;
        if (bars) {
            lo = cell_number(row[lo_i]).value_or(nan);
            hi = cell_number(row[hi_i]).value_or(nan);
        }
        s.points.push_back({*x, *y, lo, hi});
    }

    double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
    for (auto& [_, s] : groups) {
        std::sort(s.points.begin(), s.points.end(), [](const auto& a, const auto& b) { return a[0] < b[0]; });
        for (const auto& p : s.points) {
            xmin = std::min(xmin, p[0]);
            xmax = std::max(xmax, p[0]);
            for (int k : {1, 2, 3})
                if (std::isfinite(p[k])) {
                    ymin = std::min(ymin, p[k]);
                    ymax = std::max(ymax, p[k]);
                }
        }
    }
    if (spec.reference_y) {
        ymin = std::min(ymin, *spec.reference_y);
        ymax = std::max(ymax, *spec.reference_y);
    }
    if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    if (xmax == xmin) xmin -= 0.5, xmax += 0.5;
    if (ymax == ymin) ymin -= 0.5, ymax += 0.5;
    const double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    const double W = 720, H = 460, L = 70, R = 230, T = 40, B = 50;
    auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << detail::esc(spec.title)
        << "</text>\n";
    svg << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
        << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = xmin + (xmax - xmin) * k / 4.0;
        const double yv = ymin + (ymax - ymin) * k / 4.0;
        svg << "<text x=\"" << detail::coord(px(xv)) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">"
            << detail::fmt(xv) << "</text>\n";
        svg << "<text x=\"" << L - 6 << "\" y=\"" << detail::coord(py(yv) + 4) << "\" text-anchor=\"end\">"
            << detail::fmt(yv) << "</text>\n";
    }
    svg << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">"
        << detail::esc(spec.x_column) << "</text>\n";
    svg << "<text transform=\"translate(16," << (T + H - B) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
        << detail::esc(spec.y_column) << "</text>\n";
    if (spec.reference_y) {
        svg << "<line x1=\"" << L << "\" y1=\"" << detail::coord(py(*spec.reference_y)) << "\" x2=\"" << W - R
            << "\" y2=\"" << detail::coord(py(*spec.reference_y)) << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
    }
    std::size_t si = 0;
    for (const auto& label : order) {
        const auto& s = groups[label];
        const char* color = palette[si % 10];
        if (!spec.scatter && s.points.size() > 1) {
            svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
            for (const auto& p : s.points) svg << detail::coord(px(p[0])) << "," << detail::coord(py(p[1])) << " ";
            svg << "\"/>\n";
        }
        for (const auto& p : s.points) {
            if (bars && std::isfinite(p[2]) && std::isfinite(p[3]))
                svg << "<line x1=\"" << detail::coord(px(p[0])) << "\" y1=\"" << detail::coord(py(p[2]))
                    << "\" x2=\"" << detail::coord(px(p[0])) << "\" y2=\"" << detail::coord(py(p[3]))
                    << "\" stroke=\"" << color << "\"/>\n";
            svg << "<circle cx=\"" << detail::coord(px(p[0])) << "\" cy=\"" << detail::coord(py(p[1]))
                << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
        }
        const double ly = T + 14.0 * static_cast<double>(si);
        svg << "<rect x=\"" << W - R + 10 << "\" y=\"" << ly << "\" width=\"10\" height=\"10\" fill=\"" << color
            << "\"/>\n";
        svg << "<text x=\"" << W - R + 24 << "\" y=\"" << ly + 9 << "\">" << detail::esc(label.empty() ? spec.y_column : label)
            << "</text>\n";
        ++si;
    }
    svg << "</svg>\n";
    return svg.str();
}

//---------------------------------------------------------------------------//
// Output directory
//---------------------------------------------------------------------------//

enum class Format { Csv, Json, Svg };

/// Writes result files into one directory. Each file is written to a
/// temporary name and renamed into place; on failure the partial file is
/// removed and IoError is thrown.
class OutputWriter {
public:
    OutputWriter(std::filesystem::path dir, std::set<Format> formats) : dir_(std::move(dir)), formats_(std::move(formats)) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec || !std::filesystem::is_directory(dir_))
            throw IoError("cannot create output directory " + dir_.string() + ": " + ec.message());
    }

    bool wants(Format f) const { return formats_.count(f) > 0; }

    void write_table(const Table& t) {
        if (wants(Format::Csv)) write_file(t.name + ".csv", to_csv(t));
        if (wants(Format::Json)) write_file(t.name + ".json", to_json(t).dump(2) + "\n");
    }

    void write_chart(const std::string& name, const Table& t, const ChartSpec& spec) {
        if (wants(Format::Svg)) write_file(name + ".svg", render_svg(t, spec));
    }

    void write_file(const std::string& name, const std::string& content) {
        const auto target = dir_ / name;
        const auto tmp = dir_ / (name + ".partial");
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (out) out << content;
            out.flush();
            if (!out) {
                std::error_code ec;
                std::filesystem::remove(tmp, ec);
                throw IoError("failed writing " + target.string());
            }
        }
        std::error_code ec;
        std::filesystem::rename(tmp, target, ec);
        if (ec) {
            std::filesystem::remove(tmp, ec);
            throw IoError("failed writing " + target.string());
        }
        written_.push_back(name);
    }

    const std::vector<std::string>& written() const { return written_; }
    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
    std::set<Format> formats_;
    std::vector<std::string> written_;
};

}  // namespace sice::report
