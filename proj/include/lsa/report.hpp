#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lsa/config.hpp"
#include "lsa/manifest.hpp"

// Human-readable run summaries and the sweep plot writer.

namespace lsa {

struct MetricLine {
    std::string name;
    std::vector<double> values;  // one per run directory
};

inline std::string format_metric(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(6) << v;
    return os.str();
}

// Aligned metric table; with two runs a delta column is appended.
inline std::string render_metric_table(const std::vector<std::string>& run_names,
                                       const std::vector<MetricLine>& lines) {
    size_t name_width = 10;
    for (const auto& l : lines) name_width = std::max(name_width, l.name.size());
    std::ostringstream os;
    os << std::left << std::setw(int(name_width) + 2) << "metric";
    for (const auto& r : run_names) os << std::right << std::setw(14) << r;
    if (run_names.size() == 2) os << std::right << std::setw(14) << "delta";
    os << "\n";
    for (const auto& l : lines) {
        os << std::left << std::setw(int(name_width) + 2) << l.name;
        for (double v : l.values) os << std::right << std::setw(14) << format_metric(v);
        if (l.values.size() == 2)
            os << std::right << std::setw(14) << format_metric(l.values[1] - l.values[0]);
        os << "\n";
    }
    return os.str();
}

inline nlohmann::json load_metrics(const std::string& run_dir) {
    std::ifstream in(std::filesystem::path(run_dir) / "metrics.json");
    if (!in) throw std::runtime_error("missing metrics.json in " + run_dir);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw std::runtime_error("corrupted metrics.json in " + run_dir);
    return j;
}

// Summary for one or two run directories: metric table plus config diff
// against the built-in defaults.
inline std::string render_report(const std::vector<std::string>& run_dirs) {
    std::vector<nlohmann::json> metrics;
    std::vector<std::string> names;
    for (const auto& dir : run_dirs) {
        RunManifest manifest = RunManifest::read(dir);  // throws on missing/corrupt
        names.push_back(std::filesystem::path(dir).filename().string());
        metrics.push_back(load_metrics(dir));
        (void)manifest;
    }
    std::vector<MetricLine> lines;
    for (const char* key : {"mse", "mae", "ndcg_at_10"}) {
        MetricLine line{key, {}};
        for (const auto& m : metrics) line.values.push_back(m.value(key, 0.0));
        lines.push_back(std::move(line));
    }
    std::ostringstream os;
    os << render_metric_table(names, lines);

    for (size_t i = 0; i < run_dirs.size(); ++i) {
        AppConfig cfg;
        nlohmann::json snapshot = RunManifest::read(run_dirs[i]).config;
        for (auto& [section, keys] : snapshot.items()) {
            if (!keys.is_object()) continue;
            for (auto& [key, value] : keys.items()) {
                std::ostringstream v;
                if (value.is_number_float())
                    v << value.get<double>();
                else
                    v << value;
                try {
                    set_config_key(cfg, section + "." + key, v.str());
                } catch (const ConfigError&) {
                }
            }
        }
        auto diff = config_diff_vs_defaults(cfg);
        os << "\n" << names[i] << " config vs defaults:";
        if (diff.empty()) os << " (defaults)";
        os << "\n";
        for (const auto& [key, cur, def] : diff)
            os << "  " << key << " = " << cur << " (default " << def << ")\n";
    }
    return os.str();
}

// Minimal line chart; enough for the K/N sensitivity sweeps.
inline void write_sweep_svg(const std::string& path, const std::string& param,
                            const std::vector<std::pair<int, double>>& rows) {
    if (rows.empty()) throw std::invalid_argument("sweep plot: no rows");
    double xmin = rows.front().first, xmax = rows.back().first;
    double ymin = rows.front().second, ymax = rows.front().second;
    for (const auto& [x, y] : rows) {
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
    }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1e-6;
    const double W = 480, H = 320, pad = 48;
    auto sx = [&](double x) { return pad + (x - xmin) / (xmax - xmin) * (W - 2 * pad); };
    auto sy = [&](double y) { return H - pad - (y - ymin) / (ymax - ymin) * (H - 2 * pad); };

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write plot: " + path);
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
    out << "<rect width='100%' height='100%' fill='white'/>\n";
    out << "<line x1='" << pad << "' y1='" << H - pad << "' x2='" << W - pad << "' y2='"
        << H - pad << "' stroke='black'/>\n";
    out << "<line x1='" << pad << "' y1='" << pad << "' x2='" << pad << "' y2='" << H - pad
        << "' stroke='black'/>\n";
    out << "<polyline fill='none' stroke='steelblue' stroke-width='2' points='";
    for (const auto& [x, y] : rows) out << sx(x) << "," << sy(y) << " ";
    out << "'/>\n";
    for (const auto& [x, y] : rows) {
        out << "<circle cx='" << sx(x) << "' cy='" << sy(y) << "' r='3' fill='steelblue'/>\n";
        out << "<text x='" << sx(x) << "' y='" << H - pad + 16
            << "' font-size='11' text-anchor='middle'>" << x << "</text>\n";
    }
    out << "<text x='" << W / 2 << "' y='" << H - 8 << "' font-size='12' text-anchor='middle'>"
        << param << "</text>\n";
    out << "<text x='14' y='" << H / 2
        << "' font-size='12' text-anchor='middle' transform='rotate(-90 14 " << H / 2 << ")'>"
        << "test MSE</text>\n";
    out << "</svg>\n";
}

}  // namespace lsa
