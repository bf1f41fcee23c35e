#include "psteer/analysis/report.hpp"

#include "psteer/io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace psteer::analysis {

using nlohmann::json;

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

Instrument instrument_from(const std::string& s) {
    if (s == "sjt") return Instrument::sjt;
    if (s == "inventory") return Instrument::inventory;
    throw ConfigError("unknown instrument '" + s + "'");
}

json means_json(const std::map<std::pair<std::string, Direction>, double>& m) {
    json out = json::array();
    for (const auto& [k, v] : m) out.push_back({{"trait", k.first}, {"direction", to_string(k.second)}, {"value", v}});
    return out;
}

std::map<std::pair<std::string, Direction>, double> means_from(const json& j) {
    std::map<std::pair<std::string, Direction>, double> out;
    for (const auto& e : j)
        out[{e.at("trait").get<std::string>(), direction_from_string(e.at("direction").get<std::string>())}] =
            e.at("value").get<double>();
    return out;
}

json opt_matrix(const OptMatrix& m) {
    json out = json::array();
    for (const auto& row : m) {
        json r = json::array();
        for (const auto& v : row) r.push_back(opt(v));
        out.push_back(std::move(r));
    }
    return out;
}

json missing_json(const std::vector<std::pair<std::string, Direction>>& missing) {
    json out = json::array();
    for (const auto& [t, d] : missing) out.push_back(t + "/" + to_string(d));
    return out;
}

json win_json(const WinTable& w) {
    json proportion = json::object(), wins = json::object(), winners = json::object();
    for (const auto& [m, p] : w.proportion) proportion[to_string(m)] = p;
    for (const auto& [m, n] : w.wins) wins[to_string(m)] = n;
    for (const auto& [cell, ms] : w.winners) {
        json names = json::array();
        for (auto m : ms) names.push_back(to_string(m));
        winners[cell] = names;
    }
    return {{"cells", w.cells}, {"wins", wins}, {"proportion", proportion}, {"winners", winners}};
}

std::vector<std::string> trait_order(const std::vector<std::string>& preferred, const std::vector<ScoreSurface>& surfaces) {
    std::vector<std::string> out = preferred;
    for (const auto& s : surfaces)
        for (const auto& t : s.traits())
            if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
    return out;
}

struct ModelTables {
    json model;
    std::vector<WinCell> sjt_cells, inventory_cells;
};

ModelTables model_report(const std::string& model_id, const ModelInputs& in, const std::vector<std::string>& preferred) {
    auto surfaces = ScoreSurface::from_sweeps(in.sweeps);
    for (auto& s : surfaces) {
        const auto it = in.p2.find(s.instrument());
        if (it == in.p2.end()) continue;
        for (const auto& [k, v] : it->second) s.set_p2(k.first, k.second, v);
    }
    const auto traits = trait_order(preferred, surfaces);

    ModelTables out;
    json& m = out.model;
    m["baselines"] = json::object();
    m["mu_star"] = json::array();
    m["mu_sum"] = json::array();
    m["phi"] = json::array();

    std::map<Instrument, std::map<std::string, std::pair<double, int>>> base_acc;
    for (const auto& s : surfaces)
        for (const auto& t : s.traits())
            if (const auto b = s.baseline(t)) {
                auto& [sum, n] = base_acc[s.instrument()][t];
                sum += *b;
                ++n;
            }
    std::map<Instrument, std::map<std::string, double>> baselines;
    for (const auto& [inst, by_trait] : base_acc)
        for (const auto& [t, sn] : by_trait) {
            baselines[inst][t] = sn.first / sn.second;
            m["baselines"][to_string(inst)][t] = baselines[inst][t];
        }
    json p2 = json::object();
    for (const auto& [inst, means] : in.p2) p2[to_string(inst)] = means_json(means);
    m["p2"] = p2;

    // phi per (instrument, stride, trait, direction) and method, for the win tables
    std::map<std::tuple<Instrument, int, std::string, Direction>, std::map<Method, std::optional<double>>> phi_cells;

    for (const auto& s : surfaces) {
        const std::string inst = to_string(s.instrument());
        const std::string method = to_string(s.method());
        for (int stride : s.strides()) {
            for (int layer : s.all_layers()) {
                for (const auto& t : traits)
                    for (auto d : {Direction::up, Direction::down}) {
                        const auto e = mu_star(s, {layer, stride, t, d});
                        m["mu_star"].push_back({{"instrument", inst},
                                                {"method", method},
                                                {"stride", stride},
                                                {"layer", layer},
                                                {"trait", t},
                                                {"direction", to_string(d)},
                                                {"value", e ? json(e->value) : json(nullptr)},
                                                {"alpha", e ? json(e->alpha) : json(nullptr)},
                                                {"record_id", e ? json(e->record_id) : json(nullptr)}});
                    }
                const auto agg = mu_sum(s, layer, stride, preferred);
                m["mu_sum"].push_back({{"instrument", inst},
                                       {"method", method},
                                       {"stride", stride},
                                       {"layer", layer},
                                       {"value", opt(agg.value)},
                                       {"missing", missing_json(agg.missing)}});
            }
            for (const auto& t : traits)
                for (auto d : {Direction::up, Direction::down}) {
                    const auto e = phi(s, stride, t, d);
                    json row = {{"instrument", inst}, {"method", method}, {"stride", stride}, {"trait", t},
                                {"direction", to_string(d)}, {"value", nullptr}, {"layer", nullptr},
                                {"alpha", nullptr}, {"record_id", nullptr}, {"delta0", nullptr},
                                {"delta_p2", nullptr}};
                    phi_cells[{s.instrument(), stride, t, d}][s.method()] =
                        e ? std::optional(e->value) : std::nullopt;
                    if (e) {
                        row["value"] = e->value;
                        row["layer"] = e->layer;
                        row["alpha"] = e->alpha;
                        row["record_id"] = e->record_id;
                        const auto b = baselines[s.instrument()].find(t);
                        if (b != baselines[s.instrument()].end()) {
                            const auto dl = deltas(e->value, b->second, s.p2(t, d));
                            row["delta0"] = dl.from_baseline;
                            row["delta_p2"] = opt(dl.from_p2);
                        }
                    }
                    m["phi"].push_back(std::move(row));
                }
        }
    }

    json wins = json::object();
    for (auto inst : {Instrument::sjt, Instrument::inventory}) {
        std::vector<WinCell> cells;
        for (const auto& [key, by_method] : phi_cells) {
            const auto& [ci, stride, t, d] = key;
            if (ci != inst) continue;
            const auto b = baselines[inst].find(t);
            if (b == baselines[inst].end()) continue;
            WinCell c{"s" + std::to_string(stride) + "/" + t + "/" + to_string(d), d, b->second, by_method};
            cells.push_back(c);
            c.id = model_id + "/" + c.id;
            (inst == Instrument::sjt ? out.sjt_cells : out.inventory_cells).push_back(std::move(c));
        }
        wins[to_string(inst)] = win_json(win_table(cells));
    }
    m["wins"] = wins;

    std::vector<CrossTraitTrend> trends;
    for (const auto& [cfg, records] : in.replays) trends.push_back(CrossTraitTrend::from_replay(cfg, records));
    const auto cov = covariance_and_leakage(trends, preferred);
    json fits = json::array();
    for (const auto& [key, f] : cov.fits) {
        const auto a = key.find('/'), b = key.rfind('/');
        fits.push_back({{"target", key.substr(0, a)},
                        {"direction", key.substr(a + 1, b - a - 1)},
                        {"trait", key.substr(b + 1)},
                        {"slope", f.slope},
                        {"intercept", f.intercept},
                        {"r2", opt(f.r2)},
                        {"class", to_string(f.linearity)},
                        {"points", f.points}});
    }
    m["trends"] = fits;
    m["covariance"] = {{"traits", cov.traits},
                       {"M", opt_matrix(cov.M)},
                       {"r_up", opt_matrix(cov.r.at(Direction::up))},
                       {"r_down", opt_matrix(cov.r.at(Direction::down))},
                       {"m", cov.linear_trends},
                       {"trends", cov.trends},
                       {"lambda", opt(cov.lambda)},
                       {"lambda_fixed", opt(cov.lambda_fixed)}};
    json big_two = json::object();
    for (const auto& [pair, flag] : big_two_check(cov)) big_two[pair] = flag ? json(*flag) : json(nullptr);
    m["big_two"] = big_two;

    json steer = json::object();
    for (const auto& [name, means] : in.comparisons) {
        const auto agg = steerability(means.up, means.down, preferred);
        steer[name] = {{"value", opt(agg.value)}, {"missing", missing_json(agg.missing)}};
    }
    m["steerability"] = steer;
    return out;
}

std::string csv_cell(const json& v) {
    if (v.is_null()) return "";
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
        return q + "\"";
    }
    if (v.is_boolean()) return v.get<bool>() ? "T" : "F";
    if (v.is_number_float()) return format_number(v.get<double>());
    if (v.is_array()) {
        std::string joined;
        for (const auto& e : v) joined += (joined.empty() ? "" : ";") + (e.is_string() ? e.get<std::string>() : e.dump());
        return csv_cell(json(joined));
    }
    return v.dump();
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<json>>& rows) {
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
    out += "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + csv_cell(row[i]);
        out += "\n";
    }
    io::write_text(path, out);
}

struct Series {
    std::string name;
    std::vector<std::pair<double, std::optional<double>>> points;
};

// Minimal static line chart; undefined points break the line.
std::string svg_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                      const std::vector<Series>& series, double y_lo, double y_hi) {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    constexpr double W = 640, H = 400, L = 60, R = 150, T = 40, B = 50;
    double x_lo = 0, x_hi = 1;
    bool any = false;
    for (const auto& s : series)
        for (const auto& [x, _] : s.points) {
            x_lo = any ? std::min(x_lo, x) : x;
            x_hi = any ? std::max(x_hi, x) : x;
            any = true;
        }
    if (x_hi == x_lo) x_hi = x_lo + 1;
    auto px = [&](double x) { return L + (x - x_lo) / (x_hi - x_lo) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - y_lo) / (y_hi - y_lo) * (H - T - B); };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
    svg << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
        << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double y = y_lo + (y_hi - y_lo) * i / 4.0;
        svg << "<text x=\"" << L - 6 << "\" y=\"" << py(y) + 4 << "\" text-anchor=\"end\">" << format_number(y)
            << "</text>\n";
        const double x = x_lo + (x_hi - x_lo) * i / 4.0;
        svg << "<text x=\"" << px(x) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">"
            << format_number(std::round(x * 100) / 100) << "</text>\n";
    }
    svg << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << x_label
        << "</text>\n";
    svg << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
        << (T + H - B) / 2 << ")\">" << y_label << "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const char* color = palette[k % 10];
        std::string path;
        bool pen = false;
        for (const auto& [x, y] : series[k].points) {
            if (!y) {
                pen = false;
                continue;
            }
            path += (pen ? " L" : " M") + format_number(px(x)) + " " + format_number(py(*y));
            pen = true;
            svg << "<circle cx=\"" << px(x) << "\" cy=\"" << py(*y) << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
        }
        if (!path.empty())
            svg << "<path d=\"" << path.substr(1) << "\" fill=\"none\" stroke=\"" << color << "\"/>\n";
        svg << "<text x=\"" << W - R + 10 << "\" y=\"" << T + 16 * (k + 1) << "\" fill=\"" << color << "\">"
            << series[k].name << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

std::string safe(std::string s) {
    for (char& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '.') c = '_';
    return s;
}

}  // namespace

json comparison_json(const std::string& model_id, const std::map<std::string, MethodMeans>& methods,
                     const std::map<Instrument, std::map<std::pair<std::string, Direction>, double>>& p2) {
    json m = json::object();
    for (const auto& [name, means] : methods) m[name] = {{"up", means.up}, {"down", means.down}};
    json p = json::object();
    for (const auto& [inst, means] : p2) p[to_string(inst)] = means_json(means);
    return {{"kind", "comparison"}, {"model_id", model_id}, {"methods", m}, {"p2", p}};
}

ReportInputs load_run(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw ConfigError(dir.string() + " is not a directory");
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
        if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());

    ReportInputs inputs;
    for (const auto& path : files) {
        const auto ext = path.extension().string();
        if (ext == ".jsonl") {
            std::ifstream in(path);
            std::string first;
            std::getline(in, first);
            json manifest;
            try {
                manifest = json::parse(first);
            } catch (const json::parse_error&) {
                continue;
            }
            if (!manifest.is_object()) continue;
            const auto kind = manifest.value("kind", "");
            if (kind == "sweep") {
                auto loaded = sweep::load_sweep(path);
                inputs.models[loaded.first.model_id].sweeps.push_back(std::move(loaded));
            } else if (kind == "replay") {
                auto loaded = sweep::load_replay(path);
                inputs.models[loaded.first.model_id].replays.push_back(std::move(loaded));
            }
        } else if (ext == ".json") {
            json j;
            try {
                j = io::read_json(path);
            } catch (const Error&) {
                continue;
            }
            if (!j.is_object() || j.value("kind", "") != "comparison") continue;
            try {
                auto& model = inputs.models[j.at("model_id").get<std::string>()];
                for (const auto& [name, means] : j.at("methods").items())
                    model.comparisons[name] = {means.at("up").get<std::map<std::string, double>>(),
                                               means.at("down").get<std::map<std::string, double>>()};
                const json p2 = j.value("p2", json::object());
                for (const auto& [inst, means] : p2.items())
                    model.p2[instrument_from(inst)] = means_from(means);
            } catch (const json::exception& e) {
                throw ConfigError(path.string() + ": " + e.what());
            }
        }
    }
    return inputs;
}

json build_report(const ReportInputs& inputs) {
    json report = {{"format", "psteer-report/1"}, {"traits", inputs.traits}, {"models", json::object()}};
    std::vector<WinCell> sjt_cells, inventory_cells;
    for (const auto& [model_id, in] : inputs.models) {
        auto tables = model_report(model_id, in, inputs.traits);
        report["models"][model_id] = std::move(tables.model);
        sjt_cells.insert(sjt_cells.end(), tables.sjt_cells.begin(), tables.sjt_cells.end());
        inventory_cells.insert(inventory_cells.end(), tables.inventory_cells.begin(), tables.inventory_cells.end());
    }
    report["wins"] = {{"sjt", win_json(win_table(sjt_cells))}, {"inventory", win_json(win_table(inventory_cells))}};
    report["notes"] = {
        {"tie_breaks", "mu_star keeps the smallest alpha among equal extrema; phi keeps the smallest layer, then the "
                       "smallest alpha; win ties all count as wins"},
        {"undefined", "null marks an undefined value (no valid records, constant series, or missing cells)"},
        {"lambda", "lambda averages |M_ij| over defined off-diagonal entries per row, skipping rows with none; "
                   "lambda_fixed uses the fixed 1/5 and 1/4 denominators over defined entries"},
        {"pearson", "correlations include the alpha = 0 point of each replay"},
        {"baselines", "mu0 per trait is the mean alpha = 0 score over that model's sweeps"}};
    return report;
}

void write_report(const json& report, const std::filesystem::path& dir) {
    io::write_json(dir / "report.json", report);
    const auto tables = dir / "tables";
    const auto plots = dir / "plots";
    std::filesystem::create_directories(tables);
    std::filesystem::create_directories(plots);

    std::vector<std::vector<json>> phi_rows, star_rows, sum_rows, trend_rows, leak_rows, steer_rows, best_rows,
        summary_rows;
    for (const auto& [model, m] : report.at("models").items()) {
        for (const auto& r : m.at("phi")) {
            phi_rows.push_back({model, r["instrument"], r["method"], r["stride"], r["trait"], r["direction"],
                                r["value"], r["layer"], r["alpha"], r["delta0"], r["delta_p2"], r["record_id"]});
            if (r["instrument"] == "sjt" && r["method"] == "MDS" && r["stride"] == 1)
                best_rows.push_back({model, r["trait"], r["direction"], r["value"]});
        }
        for (const auto& r : m.at("mu_star"))
            star_rows.push_back({model, r["instrument"], r["method"], r["stride"], r["layer"], r["trait"],
                                 r["direction"], r["value"], r["alpha"], r["record_id"]});
        for (const auto& r : m.at("mu_sum"))
            sum_rows.push_back({model, r["instrument"], r["method"], r["stride"], r["layer"], r["value"], r["missing"]});
        for (const auto& r : m.at("trends"))
            trend_rows.push_back({model, r["target"], r["direction"], r["trait"], r["slope"], r["intercept"], r["r2"],
                                  r["class"], r["points"]});
        const auto& cov = m.at("covariance");
        const auto& b2 = m.at("big_two");
        leak_rows.push_back({model, cov["m"], cov["trends"], cov["lambda"], cov["lambda_fixed"], b2.value("E-O", json()),
                             b2.value("A-C", json()), b2.value("N-A", json()), b2.value("N-C", json())});
        for (const auto& [method, s] : m.at("steerability").items()) steer_rows.push_back({model, method, s["value"]});

        // sweep summary layout: one row per (method, trait, direction) at stride 1, both instruments side by side
        std::map<std::tuple<std::string, std::string, std::string>, std::map<std::string, json>> summary;
        for (const auto& r : m.at("phi"))
            if (r["stride"] == 1)
                summary[{r["method"], r["trait"], r["direction"]}][r["instrument"].get<std::string>()] = r;
        for (const auto& [key, by_inst] : summary) {
            std::vector<json> row = {model, std::get<0>(key), std::get<1>(key), std::get<2>(key)};
            for (const char* inst : {"inventory", "sjt"}) {
                const auto it = by_inst.find(inst);
                const json r = it == by_inst.end() ? json::object() : it->second;
                for (const char* f : {"layer", "alpha", "value", "delta0", "delta_p2"}) row.push_back(r.value(f, json()));
            }
            summary_rows.push_back(std::move(row));
        }

        // covariance matrix
        std::vector<std::vector<json>> mrows;
        const auto traits = cov["traits"];
        for (std::size_t i = 0; i < traits.size(); ++i) {
            std::vector<json> row = {traits[i]};
            for (const auto& v : cov["M"][i]) row.push_back(v);
            mrows.push_back(std::move(row));
        }
        std::vector<std::string> header = {"trait"};
        for (const auto& t : traits) header.push_back(t.get<std::string>());
        write_csv(tables / ("covariance__" + safe(model) + ".csv"), header, mrows);

        // plots: mu_sum against layer per stride, mu* against layer per (trait, direction)
        std::map<std::pair<std::string, std::string>, std::map<int, Series>> sum_series;
        for (const auto& r : m.at("mu_sum")) {
            auto& s = sum_series[{r["instrument"], r["method"]}][r["stride"].get<int>()];
            s.name = "s=" + r["stride"].dump();
            s.points.emplace_back(r["layer"].get<double>(), r["value"].is_null() ? std::nullopt
                                                                                  : std::optional(r["value"].get<double>()));
        }
        for (const auto& [key, by_stride] : sum_series) {
            std::vector<Series> series;
            std::vector<std::vector<json>> rows;
            for (const auto& [stride, s] : by_stride) {
                series.push_back(s);
                for (const auto& [x, y] : s.points) rows.push_back({stride, x, opt(y)});
            }
            const std::string stem = "mu_sum__" + safe(model) + "__" + key.first + "__" + key.second;
            write_csv(plots / (stem + ".csv"), {"stride", "layer", "mu_sum"}, rows);
            io::write_text(plots / (stem + ".svg"),
                           svg_chart(model + " " + key.second + " " + key.first + ": mu_sum by layer", "layer",
                                     "mu_sum", series, 2.0, 10.0));
        }
        std::map<std::tuple<std::string, std::string, int>, std::map<std::string, Series>> star_series;
        for (const auto& r : m.at("mu_star")) {
            const std::string name = r["trait"].get<std::string>() + " " + r["direction"].get<std::string>();
            auto& s = star_series[{r["instrument"], r["method"], r["stride"].get<int>()}][name];
            s.name = name;
            s.points.emplace_back(r["layer"].get<double>(), r["value"].is_null() ? std::nullopt
                                                                                  : std::optional(r["value"].get<double>()));
        }
        for (const auto& [key, by_cell] : star_series) {
            const auto& [inst, method, stride] = key;
            std::vector<Series> series;
            std::vector<std::vector<json>> rows;
            for (const auto& [name, s] : by_cell) {
                series.push_back(s);
                for (const auto& [x, y] : s.points) rows.push_back({name, x, opt(y)});
            }
            const std::string stem = "extrema__" + safe(model) + "__" + inst + "__" + method + "__s" + std::to_string(stride);
            write_csv(plots / (stem + ".csv"), {"cell", "layer", "mu_star"}, rows);
            io::write_text(plots / (stem + ".svg"),
                           svg_chart(model + " " + method + " " + inst + " s=" + std::to_string(stride) +
                                         ": layerwise extrema",
                                     "layer", "mu*", series, 1.0, 5.0));
        }
    }

    write_csv(tables / "phi.csv",
              {"model", "instrument", "method", "stride", "trait", "direction", "phi", "layer", "alpha", "delta0",
               "delta_p2", "record_id"},
              phi_rows);
    write_csv(tables / "mu_star.csv",
              {"model", "instrument", "method", "stride", "layer", "trait", "direction", "mu_star", "alpha", "record_id"},
              star_rows);
    write_csv(tables / "mu_sum.csv", {"model", "instrument", "method", "stride", "layer", "mu_sum", "missing"}, sum_rows);
    write_csv(tables / "trends.csv",
              {"model", "target", "direction", "trait", "slope", "intercept", "r2", "class", "points"}, trend_rows);
    write_csv(tables / "leakage.csv",
              {"model", "m", "trends", "lambda", "lambda_fixed", "E-O", "A-C", "N-A", "N-C"}, leak_rows);
    write_csv(tables / "steerability.csv", {"model", "method", "Phi"}, steer_rows);
    write_csv(tables / "best_scores.csv", {"model", "trait", "direction", "phi"}, best_rows);
    write_csv(tables / "sweep_summary.csv",
              {"model", "method", "trait", "direction", "inventory_layer", "inventory_alpha", "inventory_phi",
               "inventory_delta0", "inventory_delta_p2", "sjt_layer", "sjt_alpha", "sjt_phi", "sjt_delta0",
               "sjt_delta_p2"},
              summary_rows);
    std::vector<std::vector<json>> win_rows;
    for (const auto& [inst, w] : report.at("wins").items())
        for (const auto& [method, p] : w.at("proportion").items())
            win_rows.push_back({inst, method, w["wins"][method], w["cells"], p});
    write_csv(tables / "wins.csv", {"instrument", "method", "wins", "cells", "proportion"}, win_rows);
}

}  // namespace psteer::analysis
