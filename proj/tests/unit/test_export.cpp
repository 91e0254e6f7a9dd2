#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "prosim/export.hpp"

using namespace prosim;
using namespace prosim::interface;

namespace fs = std::filesystem;

namespace {

std::size_t count(const std::string& s, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
    return n;
}

const trials::TrialRecord& sample_trial() {
    static const auto rec = trials::run_trial(trials::make_pick_and_place("exp"), default_config(), 3);
    return rec;
}

}  // namespace

TEST(Channels, FromTraceAligned) {
    const auto ch = channels_from_trace(sample_trial().trace);
    ASSERT_EQ(ch.size(), sample_trial().trace.size());
    EXPECT_EQ(ch.t[0], 0.0);
    EXPECT_DOUBLE_EQ(ch.t[1500], 1.5);
    EXPECT_EQ(ch.h.size(), ch.size());
    EXPECT_EQ(ch.side.size(), ch.size());
}

TEST(Channels, CsvRoundTripIsExact) {
    const auto ch = channels_from_trace(sample_trial().trace);
    const std::string csv = format_channels_csv(ch);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), channels_csv_header());
    std::istringstream in(csv);
    EXPECT_EQ(parse_channels_csv(in), ch);
}

TEST(Channels, ParseRejectsBadRows) {
    const std::string head = channels_csv_header() + "\n";
    {
        std::istringstream in(head + "0,0,0.1,0,none,,0,0.1,0\n0.001,0,0.1,0\n");
        EXPECT_THROW(parse_channels_csv(in), trials::TraceIntegrityError);
    }
    {
        std::istringstream in(head + "0.002,0,0.1,0,none,,0,0.1,0\n0.001,0,0.1,0,none,,0,0.1,0\n");
        EXPECT_THROW(parse_channels_csv(in), trials::TraceIntegrityError);
    }
    {
        std::istringstream in(head + "0,0,0.1,0,palmar,,0,0.1,0\n");
        EXPECT_THROW(parse_channels_csv(in), trials::TraceIntegrityError);
    }
    {
        std::istringstream in("t,x\n");
        EXPECT_THROW(parse_channels_csv(in), trials::TraceIntegrityError);
    }
}

TEST(Svg, OnePanelPerGroupAndPlacementMarker) {
    const auto ch = channels_from_trace(sample_trial().trace);
    const std::string svg = render_channels_svg(ch, 12.0);
    EXPECT_EQ(svg.rfind("<svg", 0), 0u);
    EXPECT_NE(svg.find("</svg>"), std::string::npos);
    for (auto g : kChannelGroups) EXPECT_NE(svg.find(">" + std::string(g)), std::string::npos) << g;
    EXPECT_EQ(count(svg, "fill=\"none\" stroke=\"#bbb\""), kChannelGroups.size());
    EXPECT_EQ(count(svg, "stroke-dasharray"), 1u);
    EXPECT_EQ(count(render_channels_svg(ch), "stroke-dasharray"), 0u);
}

TEST(ExportTrial, WritesNextToTrace) {
    const auto dir = fs::temp_directory_path() / "prosim_export_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto& rec = sample_trial();
    trials::write_trace_csv(dir / "trial_exp.csv", rec.trace);
    trials::write_events_jsonl(dir / "trial_exp.events.jsonl", rec.events);

    const auto csv = export_trial(dir / "trial_exp.csv", ExportFormat::csv);
    EXPECT_EQ(csv, dir / "trial_exp.channels.csv");
    std::ifstream in(csv);
    EXPECT_EQ(parse_channels_csv(in).size(), rec.trace.size());

    const auto svg = export_trial(dir / "trial_exp.csv", ExportFormat::svg, dir / "plot.svg");
    EXPECT_EQ(svg, dir / "plot.svg");
    std::stringstream body;
    body << std::ifstream(svg).rdbuf();
    EXPECT_EQ(count(body.str(), "stroke-dasharray"), 1u);  // the trial was placed

    EXPECT_THROW(export_trial(dir / "missing.csv", ExportFormat::csv), std::runtime_error);
    fs::remove_all(dir);
}

TEST(ExportFormat, Strings) {
    EXPECT_EQ(export_format_from_string("svg"), ExportFormat::svg);
    EXPECT_ANY_THROW(export_format_from_string("png"));
}
