#include "prosim/export.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

namespace prosim::interface {

using trials::TraceIntegrityError;

ExportFormat export_format_from_string(const std::string& s) {
    if (s == "csv") return ExportFormat::csv;
    if (s == "svg") return ExportFormat::svg;
    throw std::invalid_argument(fmt::format("unknown export format '{}' (expected csv or svg)", s));
}

ChannelArrays channels_from_trace(std::span<const trials::TraceRow> trace) {
    ChannelArrays ch;
    for (const auto& r : trace) {
        ch.t.push_back(ticks_to_seconds(r.tick));
        ch.u_c.push_back(r.u_c);
        ch.aperture.push_back(r.aperture);
        ch.p.push_back(r.p);
        ch.side.push_back(r.side);
        ch.x.push_back(r.side == tactile::Side::none ? 0.0 : r.x);
        ch.tactor_current.push_back(r.tactor_current);
        ch.d.push_back(r.d);
        ch.h.push_back(r.h);
    }
    return ch;
}

std::string channels_csv_header() { return "t,u_c,aperture,p,contact_side,contact_x,tactor_current,D,H"; }

std::string format_channels_csv(const ChannelArrays& ch) {
    std::string out = channels_csv_header() + "\n";
    for (std::size_t i = 0; i < ch.size(); ++i) {
        const bool touching = ch.side[i] != tactile::Side::none;
        // Shortest round-trip representation so a re-parse is exact.
        out += fmt::format("{},{},{},{},{},{},{},{},{}\n", ch.t[i], ch.u_c[i], ch.aperture[i], ch.p[i],
                           tactile::to_string(ch.side[i]), touching ? fmt::format("{}", ch.x[i]) : std::string(),
                           ch.tactor_current[i], ch.d[i], ch.h[i]);
    }
    return out;
}

ChannelArrays parse_channels_csv(std::istream& in, const std::string& origin) {
    std::string line;
    if (!std::getline(in, line) || line != channels_csv_header()) {
        throw TraceIntegrityError(fmt::format("{}:1: unexpected channel header", origin));
    }
    ChannelArrays ch;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        auto bad = [&](const std::string& what) {
            return TraceIntegrityError(fmt::format("{}:{}: {}", origin, line_no, what));
        };
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        if (cells.size() != 9) throw bad(fmt::format("expected 9 columns, found {}", cells.size()));
        auto num = [&](const std::string& s) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(s, &used);
            } catch (const std::exception&) {
                throw bad(fmt::format("'{}' is not a number", s));
            }
            if (used != s.size() || !std::isfinite(v)) throw bad(fmt::format("'{}' is not a finite number", s));
            return v;
        };
        const double t = num(cells[0]);
        if (!ch.t.empty() && !(t > ch.t.back())) throw bad("time is not increasing");
        ch.t.push_back(t);
        ch.u_c.push_back(num(cells[1]));
        ch.aperture.push_back(num(cells[2]));
        ch.p.push_back(num(cells[3]));
        tactile::Side side{};
        try {
            side = tactile::side_from_string(cells[4]);
        } catch (const std::exception&) {
            throw bad(fmt::format("unknown side '{}'", cells[4]));
        }
        ch.side.push_back(side);
        if (side == tactile::Side::none) {
            if (!cells[5].empty()) throw bad("x given without contact");
            ch.x.push_back(0.0);
        } else {
            ch.x.push_back(num(cells[5]));
        }
        ch.tactor_current.push_back(num(cells[6]));
        ch.d.push_back(num(cells[7]));
        ch.h.push_back(num(cells[8]));
    }
    return ch;
}

namespace {

constexpr double kWidth = 900.0;
constexpr double kPanelHeight = 90.0;
constexpr double kGap = 22.0;
constexpr double kLeft = 110.0;
constexpr double kRight = 20.0;
constexpr double kTop = 20.0;
constexpr std::size_t kMaxPoints = 3000;

struct Panel {
    std::string_view name;
    std::string unit;
    const std::vector<double>* values;
};

std::string polyline(const std::vector<std::pair<double, double>>& pts, const char* colour) {
    if (pts.empty()) return {};
    std::string s = fmt::format(R"(<polyline fill="none" stroke="{}" stroke-width="1" points=")", colour);
    for (const auto& [x, y] : pts) s += fmt::format("{:.1f},{:.1f} ", x, y);
    s += "\"/>\n";
    return s;
}

}  // namespace

std::string render_channels_svg(const ChannelArrays& ch, std::optional<double> placed_s) {
    const std::size_t n = ch.size();
    const double height = kTop + kChannelGroups.size() * (kPanelHeight + kGap) + 20.0;
    std::string svg = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" font-family=\"sans-serif\" "
        "font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
        kWidth, height);

    const double t0 = n ? ch.t.front() : 0.0;
    const double t1 = n > 1 ? ch.t.back() : t0 + 1.0;
    const double plot_w = kWidth - kLeft - kRight;
    auto tx = [&](double t) { return kLeft + (t - t0) / (t1 - t0) * plot_w; };
    const std::size_t stride = std::max<std::size_t>(1, n / kMaxPoints);

    const Panel panels[] = {
        {kChannelGroups[0], "", &ch.u_c},
        {kChannelGroups[1], "m", &ch.aperture},
        {kChannelGroups[2], "", &ch.p},
        {kChannelGroups[3], "x", &ch.x},
        {kChannelGroups[4], "A", &ch.tactor_current},
        {kChannelGroups[5], "m", &ch.d},
        {kChannelGroups[6], "m", &ch.h},
    };

    for (std::size_t k = 0; k < std::size(panels); ++k) {
        const Panel& panel = panels[k];
        const double top = kTop + k * (kPanelHeight + kGap);
        const bool contact = panel.name == "contact";
        double lo = 0.0, hi = contact ? 1.0 : 0.0;  // axes always include zero
        if (!contact) {
            for (double v : *panel.values) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            if (hi - lo < 1e-9) hi = lo + 1.0;
        }
        auto ty = [&](double v) { return top + kPanelHeight - (v - lo) / (hi - lo) * kPanelHeight; };

        svg += fmt::format(
            "<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"none\" stroke=\"#bbb\"/>\n",
            kLeft, top, plot_w, kPanelHeight);
        svg += fmt::format("<text x=\"8\" y=\"{:.1f}\">{}{}</text>\n", top + kPanelHeight / 2.0, panel.name,
                           panel.unit.empty() ? "" : fmt::format(" ({})", panel.unit));
        svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\" fill=\"#666\">{:.3g}</text>\n",
                           kLeft - 4, top + 10, hi);
        svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\" fill=\"#666\">{:.3g}</text>\n",
                           kLeft - 4, top + kPanelHeight, lo);

        if (contact) {
            // Separate runs per side; gaps where nothing touches.
            std::vector<std::pair<double, double>> run;
            tactile::Side run_side = tactile::Side::none;
            auto flush = [&] {
                svg += polyline(run, run_side == tactile::Side::palmar ? "#1f77b4" : "#d62728");
                run.clear();
            };
            for (std::size_t i = 0; i < n; i += stride) {
                if (ch.side[i] != run_side) {
                    flush();
                    run_side = ch.side[i];
                }
                if (ch.side[i] != tactile::Side::none) run.emplace_back(tx(ch.t[i]), ty(ch.x[i]));
            }
            flush();
        } else {
            std::vector<std::pair<double, double>> pts;
            pts.reserve(n / stride + 1);
            for (std::size_t i = 0; i < n; i += stride) pts.emplace_back(tx(ch.t[i]), ty((*panel.values)[i]));
            svg += polyline(pts, "#222");
        }
    }

    if (placed_s && n) {
        const double x = tx(*placed_s);
        svg += fmt::format(
            "<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{0:.1f}\" y2=\"{2:.1f}\" stroke=\"#555\" stroke-dasharray=\"3,3\"/>\n",
            x, kTop, height - 20.0);
    }
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">time (s) {:.2f} to {:.2f}</text>\n",
                       kLeft + plot_w / 2.0, height - 6.0, t0, n > 1 ? t1 : t0);
    svg += "</svg>\n";
    return svg;
}

std::filesystem::path export_trial(const std::filesystem::path& trace_csv, ExportFormat format,
                                   const std::optional<std::filesystem::path>& out) {
    if (!std::filesystem::exists(trace_csv)) {
        throw std::runtime_error(fmt::format("{}: no such trace file", trace_csv.string()));
    }
    const auto trace = trials::read_trace_csv(trace_csv);
    const ChannelArrays ch = channels_from_trace(trace);

    std::filesystem::path target;
    if (out) {
        target = *out;
    } else {
        target = trace_csv;
        target.replace_filename(trace_csv.stem().string() + (format == ExportFormat::csv ? ".channels.csv" : ".svg"));
    }

    std::string body;
    if (format == ExportFormat::csv) {
        body = format_channels_csv(ch);
    } else {
        std::optional<double> placed;
        auto events_path = trace_csv;
        events_path.replace_filename(trace_csv.stem().string() + ".events.jsonl");
        if (std::filesystem::exists(events_path)) {
            for (const auto& e : trials::read_events_jsonl(events_path)) {
                if (e.type == trials::event::kPlaced) {
                    placed = ticks_to_seconds(e.tick);
                    break;
                }
            }
        }
        body = render_channels_svg(ch, placed);
    }

    std::ofstream f(target, std::ios::binary);
    if (!f) throw std::runtime_error(fmt::format("cannot write '{}'", target.string()));
    f << body;
    return target;
}

}  // namespace prosim::interface
