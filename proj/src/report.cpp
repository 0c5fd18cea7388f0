#include "dehazekit/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

using nlohmann::json;

namespace dhz {

namespace {

constexpr const char* kReportFormat = "dehazekit-report-v1";

CondKind cond_kind_from_name(const std::string& s) {
    if (s == "clean") return CondKind::Clean;
    if (s == "gaussian") return CondKind::Gaussian;
    if (s == "linf") return CondKind::Linf;
    if (s == "l0") return CondKind::L0;
    throw std::invalid_argument("unknown condition kind: " + s);
}

json condition_to_json(const EvalCondition& c) {
    json j;
    j["kind"] = cond_kind_name(c.kind);
    j["parameter"] = c.parameter;
    j["seed"] = c.seed;
    j["label"] = c.label();
    if (c.kind == CondKind::Linf) {
        j["steps"] = c.linf.steps;
        j["step_size"] = c.linf.resolved_step();
    }
    if (c.kind == CondKind::L0) {
        j["pop_size"] = c.l0.pop_size;
        j["iterations"] = c.l0.iterations;
        j["mutation"] = c.l0.mutation;
        j["crossover"] = c.l0.crossover;
    }
    return j;
}

EvalCondition condition_from_json(const json& j) {
    EvalCondition c;
    c.kind = cond_kind_from_name(j.at("kind").get<std::string>());
    c.parameter = j.at("parameter").get<double>();
    c.seed = j.at("seed").get<uint64_t>();
    if (c.kind == CondKind::Linf) {
        c.linf.epsilon = c.parameter;
        c.linf.steps = j.value("steps", c.linf.steps);
        c.linf.step_size = j.value("step_size", 0.0);
    }
    if (c.kind == CondKind::L0) {
        c.l0.pixels = static_cast<int>(c.parameter);
        c.l0.pop_size = j.value("pop_size", c.l0.pop_size);
        c.l0.iterations = j.value("iterations", c.l0.iterations);
        c.l0.mutation = j.value("mutation", c.l0.mutation);
        c.l0.crossover = j.value("crossover", c.l0.crossover);
    }
    return c;
}

} // namespace

void write_report_json(const EvalReport& report, const std::string& path) {
    json j;
    j["format"] = kReportFormat;
    j["metadata"] = report.metadata;
    json rows = json::array();
    for (const auto& row : report.rows) {
        json r;
        r["model_id"] = row.model_id;
        r["method"] = row.method;
        r["defense"] = row.defense;
        r["condition"] = condition_to_json(row.condition);
        r["mean_psnr"] = row.mean_psnr;
        r["mean_ssim"] = row.mean_ssim;
        json recs = json::array();
        for (const auto& rec : row.records) {
            json e;
            e["image"] = rec.image_index;
            e["status"] = rec.status;
            e["psnr"] = rec.psnr;
            e["ssim"] = rec.ssim;
            e["objective"] = rec.objective;
            recs.push_back(e);
        }
        r["records"] = recs;
        rows.push_back(r);
    }
    j["rows"] = rows;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write report: " + path);
    out << j.dump(1) << "\n";
}

EvalReport load_report_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open report: " + path);
    json j = json::parse(in);
    if (!j.contains("format") || j["format"] != kReportFormat)
        throw std::runtime_error("report: unknown format tag in " + path);
    EvalReport report;
    for (auto it = j.at("metadata").begin(); it != j.at("metadata").end(); ++it)
        report.metadata[it.key()] = it.value().get<std::string>();
    for (const auto& r : j.at("rows")) {
        EvalRow row;
        row.model_id = r.at("model_id").get<std::string>();
        row.method = r.at("method").get<std::string>();
        row.defense = r.at("defense").get<std::string>();
        row.condition = condition_from_json(r.at("condition"));
        row.mean_psnr = r.at("mean_psnr").get<double>();
        row.mean_ssim = r.at("mean_ssim").get<double>();
        for (const auto& e : r.at("records")) {
            ImageRecord rec;
            rec.image_index = e.at("image").get<int>();
            rec.status = e.at("status").get<std::string>();
            rec.psnr = e.at("psnr").get<double>();
            rec.ssim = e.at("ssim").get<double>();
            rec.objective = e.at("objective").get<double>();
            row.records.push_back(rec);
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

namespace {

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

} // namespace

void write_report_csv(const EvalReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write report: " + path);
    out << "model_id,method,defense,condition,parameter,record,status,psnr,ssim,objective\n";
    char buf[128];
    for (const auto& row : report.rows) {
        std::string head = csv_escape(row.model_id) + "," + csv_escape(row.method) + "," +
                           csv_escape(row.defense) + "," + csv_escape(row.condition.label()) + ",";
        std::snprintf(buf, sizeof(buf), "%g", row.condition.parameter);
        head += buf;
        for (const auto& rec : row.records) {
            std::snprintf(buf, sizeof(buf), "%d,%s,%.12g,%.12g,%.12g", rec.image_index,
                          csv_escape(rec.status).c_str(), rec.psnr, rec.ssim, rec.objective);
            out << head << "," << buf << "\n";
        }
        std::snprintf(buf, sizeof(buf), "mean,ok,%.12g,%.12g,", row.mean_psnr, row.mean_ssim);
        out << head << "," << buf << "\n";
    }
}

namespace {

struct ModelGroup {
    std::string model_id, method, defense;
    std::vector<const EvalRow*> rows; // in condition order
};

std::vector<ModelGroup> group_rows(const EvalReport& report) {
    std::vector<ModelGroup> groups;
    for (const auto& row : report.rows) {
        ModelGroup* g = nullptr;
        for (auto& existing : groups)
            if (existing.model_id == row.model_id && existing.method == row.method &&
                existing.defense == row.defense)
                g = &existing;
        if (!g) {
            groups.push_back({row.model_id, row.method, row.defense, {}});
            g = &groups.back();
        }
        g->rows.push_back(&row);
    }
    return groups;
}

std::string pad(const std::string& s, size_t width) {
    return s + std::string(width > s.size() ? width - s.size() : 0, ' ');
}

} // namespace

std::string render_report_table(const EvalReport& report) {
    auto groups = group_rows(report);

    // Column set: union of condition labels, in first-appearance order.
    std::vector<std::string> conditions;
    for (const auto& row : report.rows) {
        std::string l = row.condition.label();
        if (std::find(conditions.begin(), conditions.end(), l) == conditions.end())
            conditions.push_back(l);
    }

    size_t w_model = 5, w_method = 6, w_defense = 7;
    for (const auto& g : groups) {
        w_model = std::max(w_model, g.model_id.size());
        w_method = std::max(w_method, g.method.size());
        w_defense = std::max(w_defense, g.defense.size());
    }
    const std::string cell_hdr = "PSNR     SSIM  ";
    std::vector<size_t> w_cond;
    for (const auto& c : conditions) w_cond.push_back(std::max(c.size(), cell_hdr.size()));

    std::ostringstream out;
    out << pad("model", w_model) << "  " << pad("method", w_method) << "  "
        << pad("defense", w_defense);
    for (size_t i = 0; i < conditions.size(); ++i) out << "  | " << pad(conditions[i], w_cond[i]);
    out << "\n";
    out << pad("", w_model) << "  " << pad("", w_method) << "  " << pad("", w_defense);
    for (size_t i = 0; i < conditions.size(); ++i) out << "  | " << pad(cell_hdr, w_cond[i]);
    out << "\n";
    size_t total = w_model + w_method + w_defense + 4;
    for (size_t i = 0; i < conditions.size(); ++i) total += w_cond[i] + 4;
    out << std::string(total, '-') << "\n";

    char cell[64];
    for (const auto& g : groups) {
        out << pad(g.model_id, w_model) << "  " << pad(g.method, w_method) << "  "
            << pad(g.defense, w_defense);
        for (size_t i = 0; i < conditions.size(); ++i) {
            const EvalRow* row = nullptr;
            for (const EvalRow* r : g.rows)
                if (r->condition.label() == conditions[i]) row = r;
            if (row) {
                std::snprintf(cell, sizeof(cell), "%-8.2f %-6.4f", row->mean_psnr, row->mean_ssim);
                out << "  | " << pad(cell, w_cond[i]);
            } else {
                out << "  | " << pad("-", w_cond[i]);
            }
        }
        out << "\n";
    }
    return out.str();
}

void write_report_txt(const EvalReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write report: " + path);
    out << render_report_table(report);
}

namespace {

// One panel: mean PSNR against a budget axis. Returns SVG group markup.
std::string plot_panel(const std::vector<ModelGroup>& groups, CondKind kind,
                       const std::string& title, double x0, double y0, double w, double h) {
    // Collect (budget, psnr) series per group; clean = budget 0.
    struct Series {
        std::string name;
        std::vector<std::pair<double, double>> pts;
    };
    std::vector<Series> series;
    double xmax = 0.0, ymin = 1e300, ymax = -1e300;
    for (const auto& g : groups) {
        Series s;
        s.name = g.model_id + "/" + g.method + "/" + g.defense;
        for (const EvalRow* r : g.rows) {
            if (r->condition.kind == CondKind::Clean)
                s.pts.push_back({0.0, r->mean_psnr});
            else if (r->condition.kind == kind)
                s.pts.push_back({r->condition.parameter, r->mean_psnr});
        }
        std::sort(s.pts.begin(), s.pts.end());
        if (s.pts.size() < 2) continue;
        for (auto& [x, y] : s.pts) {
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
        series.push_back(std::move(s));
    }
    if (series.empty() || xmax == 0.0) return "";
    if (ymax - ymin < 1.0) {
        ymax += 0.5;
        ymin -= 0.5;
    }

    const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    std::ostringstream svg;
    char buf[256];
    svg << "<g>\n";
    std::snprintf(buf, sizeof(buf),
                  "<rect x='%g' y='%g' width='%g' height='%g' fill='none' stroke='#888'/>\n", x0,
                  y0, w, h);
    svg << buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x='%g' y='%g' font-size='12' text-anchor='middle'>%s</text>\n",
                  x0 + w / 2, y0 - 8, title.c_str());
    svg << buf;
    std::snprintf(buf, sizeof(buf), "<text x='%g' y='%g' font-size='10'>%.1f dB</text>\n", x0 - 44,
                  y0 + 10, ymax);
    svg << buf;
    std::snprintf(buf, sizeof(buf), "<text x='%g' y='%g' font-size='10'>%.1f dB</text>\n", x0 - 44,
                  y0 + h, ymin);
    svg << buf;
    std::snprintf(buf, sizeof(buf), "<text x='%g' y='%g' font-size='10'>%g</text>\n", x0 + w - 10,
                  y0 + h + 14, xmax);
    svg << buf;

    for (size_t s = 0; s < series.size(); ++s) {
        std::ostringstream points;
        for (auto& [x, y] : series[s].pts) {
            double px = x0 + (x / xmax) * w;
            double py = y0 + h - ((y - ymin) / (ymax - ymin)) * h;
            points << px << "," << py << " ";
        }
        std::snprintf(buf, sizeof(buf),
                      "<polyline points='%s' fill='none' stroke='%s' stroke-width='1.5'/>\n",
                      points.str().c_str(), colors[s % 6]);
        svg << buf;
        std::snprintf(buf, sizeof(buf),
                      "<text x='%g' y='%g' font-size='9' fill='%s'>%s</text>\n", x0 + 4,
                      y0 + 12 + 11.0 * static_cast<double>(s), colors[s % 6],
                      series[s].name.c_str());
        svg << buf;
    }
    svg << "</g>\n";
    return svg.str();
}

} // namespace

void write_report_svg(const EvalReport& report, const std::string& path) {
    auto groups = group_rows(report);
    std::ostringstream svg;
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='720' height='300' "
           "viewBox='0 0 720 300'>\n";
    svg << "<rect width='720' height='300' fill='white'/>\n";
    svg << plot_panel(groups, CondKind::Linf, "mean PSNR vs linf epsilon", 70, 40, 240, 200);
    svg << plot_panel(groups, CondKind::L0, "mean PSNR vs l0 pixels", 430, 40, 240, 200);
    svg << "</svg>\n";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write plot: " + path);
    out << svg.str();
}

} // namespace dhz
