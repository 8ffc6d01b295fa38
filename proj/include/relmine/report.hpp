#pragma once

// SVG charts and a Markdown summary assembled from run CSVs. Pure functions
// of the input files; byte-deterministic given identical inputs.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace relmine {

struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return i;
        throw std::runtime_error("report: missing CSV column '" + name + "'");
    }
};

inline CsvTable read_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("report: cannot open " + path);
    CsvTable t;
    std::string line;
    bool first = true;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.push_back("");
        if (first) {
            t.columns = std::move(cells);
            first = false;
        } else {
            t.rows.push_back(std::move(cells));
        }
    }
    return t;
}

namespace svg {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

inline std::string rect(double x, double y, double w, double h, const std::string& fill) {
    return "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) + "\" height=\"" +
           num(h) + "\" fill=\"" + fill + "\"/>\n";
}

inline std::string text(double x, double y, const std::string& s, int size,
                        const std::string& extra = "") {
    return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"" + std::to_string(size) +
           "\" font-family=\"sans-serif\"" + extra + ">" + s + "</text>\n";
}

inline std::string line(double x1, double y1, double x2, double y2, const std::string& stroke) {
    return "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" +
           num(y2) + "\" stroke=\"" + stroke + "\" stroke-width=\"1\"/>\n";
}

}  // namespace svg

struct PerClassSeries {
    std::string label;
    std::map<std::string, double> recall;      // predicate -> recall@100
    std::map<std::string, bool> is_implicit;
};

inline PerClassSeries read_per_class_csv(const std::string& path, const std::string& label) {
    const CsvTable t = read_csv(path);
    const auto cp = t.column("predicate");
    const auto cr = t.column("recall@100");
    const auto ci = t.column("is_implicit");
    PerClassSeries s;
    s.label = label;
    for (const auto& row : t.rows) {
        if (row[cr] == "—") continue;
        s.recall[row[cp]] = std::stod(row[cr]);
        s.is_implicit[row[cp]] = row[ci] == "1";
    }
    return s;
}

/// Grouped per-class recall bars; explicit classes in orange, implicit in
/// blue, later runs in darker shades.
inline std::string per_class_bar_chart(const std::vector<PerClassSeries>& runs) {
    std::vector<std::string> classes;
    std::map<std::string, bool> implicit_of;
    for (const auto& run : runs)
        for (const auto& [name, r] : run.recall) {
            if (!implicit_of.count(name)) classes.push_back(name);
            implicit_of[name] = run.is_implicit.at(name);
        }
    std::sort(classes.begin(), classes.end(), [&](const std::string& a, const std::string& b) {
        if (implicit_of[a] != implicit_of[b]) return !implicit_of[a];
        return a < b;
    });

    const double bar_w = runs.size() > 1 ? 10.0 : 16.0;
    const double group_w = bar_w * static_cast<double>(runs.size()) + 8.0;
    const double plot_h = 220.0, margin_l = 44.0, margin_t = 30.0, margin_b = 90.0;
    const double width = margin_l + group_w * static_cast<double>(classes.size()) + 20.0;
    const double height = margin_t + plot_h + margin_b;

    static const char* kExplicitShades[] = {"#f4a261", "#c96f2a", "#8f4b12"};
    static const char* kImplicitShades[] = {"#69a8d8", "#3a77b5", "#1d4e89"};

    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + svg::num(width) +
                      "\" height=\"" + svg::num(height) + "\">\n";
    out += svg::text(margin_l, 18, "Per-class Recall@100 (orange: explicit, blue: implicit)", 13);
    for (int tick = 0; tick <= 4; ++tick) {
        const double v = 0.25 * tick;
        const double y = margin_t + plot_h * (1.0 - v);
        out += svg::line(margin_l - 4, y, width - 10, y, "#dddddd");
        out += svg::text(4, y + 4, svg::num(v), 10);
    }
    for (std::size_t ci = 0; ci < classes.size(); ++ci) {
        const auto& name = classes[ci];
        const double gx = margin_l + group_w * static_cast<double>(ci);
        for (std::size_t ri = 0; ri < runs.size(); ++ri) {
            auto it = runs[ri].recall.find(name);
            if (it == runs[ri].recall.end()) continue;
            const double v = std::clamp(it->second, 0.0, 1.0);
            const double h = plot_h * v;
            const char* fill = implicit_of[name] ? kImplicitShades[std::min<std::size_t>(ri, 2)]
                                                 : kExplicitShades[std::min<std::size_t>(ri, 2)];
            out += svg::rect(gx + bar_w * static_cast<double>(ri), margin_t + plot_h - h, bar_w - 1,
                             h, fill);
        }
        out += "<g transform=\"translate(" + svg::num(gx + group_w / 2) + "," +
               svg::num(margin_t + plot_h + 8) + ") rotate(55)\">" +
               svg::text(0, 0, name, 10) + "</g>\n";
    }
    // legend
    double ly = margin_t + plot_h + 58;
    for (std::size_t ri = 0; ri < runs.size(); ++ri) {
        out += svg::rect(margin_l + 140.0 * static_cast<double>(ri), ly - 9, 10, 10,
                         kImplicitShades[std::min<std::size_t>(ri, 2)]);
        out += svg::text(margin_l + 140.0 * static_cast<double>(ri) + 14, ly, runs[ri].label, 11);
    }
    out += "</svg>\n";
    return out;
}

struct CurveSeries {
    std::string label;
    std::vector<std::pair<double, double>> points;  // iteration, mR@50
};

inline CurveSeries read_curve(const std::string& log_csv_path, const std::string& label) {
    const CsvTable t = read_csv(log_csv_path);
    const auto ci = t.column("iteration");
    const auto cm = t.column("mR@50");
    CurveSeries s;
    s.label = label;
    for (const auto& row : t.rows) {
        if (row[cm] == "—") continue;
        s.points.emplace_back(std::stod(row[ci]), std::stod(row[cm]));
    }
    return s;
}

inline std::string mr_curve_chart(const std::vector<CurveSeries>& runs) {
    const double plot_w = 460.0, plot_h = 220.0, margin_l = 48.0, margin_t = 28.0;
    const double width = margin_l + plot_w + 16.0, height = margin_t + plot_h + 70.0;
    double max_x = 1.0;
    for (const auto& run : runs)
        for (const auto& [x, y] : run.points) max_x = std::max(max_x, x);
    static const char* kStrokes[] = {"#1d4e89", "#c96f2a", "#2a9d8f", "#7b2d8b", "#606060"};

    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + svg::num(width) +
                      "\" height=\"" + svg::num(height) + "\">\n";
    out += svg::text(margin_l, 16, "Validation mR@50 vs iteration", 13);
    for (int tick = 0; tick <= 4; ++tick) {
        const double v = 0.25 * tick;
        const double y = margin_t + plot_h * (1.0 - v);
        out += svg::line(margin_l - 4, y, margin_l + plot_w, y, "#dddddd");
        out += svg::text(6, y + 4, svg::num(v), 10);
    }
    for (std::size_t ri = 0; ri < runs.size(); ++ri) {
        const auto& pts = runs[ri].points;
        if (pts.empty()) continue;
        std::string path = "<polyline fill=\"none\" stroke=\"";
        path += kStrokes[ri % 5];
        path += "\" stroke-width=\"1.5\" points=\"";
        for (const auto& [x, y] : pts) {
            path += svg::num(margin_l + plot_w * (x / max_x));
            path += ',';
            path += svg::num(margin_t + plot_h * (1.0 - std::clamp(y, 0.0, 1.0)));
            path += ' ';
        }
        path += "\"/>\n";
        out += path;
        out += svg::rect(margin_l + 130.0 * static_cast<double>(ri), margin_t + plot_h + 24, 10, 3,
                         kStrokes[ri % 5]);
        out += svg::text(margin_l + 130.0 * static_cast<double>(ri) + 14, margin_t + plot_h + 30,
                         runs[ri].label, 11);
    }
    out += svg::text(margin_l + plot_w - 60, margin_t + plot_h + 14, "iteration", 10);
    out += "</svg>\n";
    return out;
}

/// Markdown table of the final metrics of each run's overall CSV.
inline std::string summary_markdown(const std::vector<std::pair<std::string, CsvTable>>& runs) {
    std::string out = "# Run summary\n\n";
    out += "Ranking candidates are all (annotated pair x predicate) combinations per image,\n";
    out += "ranked globally per image. KL readings use forward KL(target || prediction).\n\n";
    if (runs.empty()) return out;
    const auto& cols = runs.front().second.columns;
    out += "| run |";
    for (const auto& c : cols) out += " " + c + " |";
    out += "\n|---|";
    for (std::size_t i = 0; i < cols.size(); ++i) out += "---|";
    out += "\n";
    for (const auto& [label, table] : runs) {
        if (table.rows.empty()) continue;
        out += "| " + label + " |";
        for (const auto& cell : table.rows.back()) out += " " + cell + " |";
        out += "\n";
    }
    return out;
}

}  // namespace relmine
