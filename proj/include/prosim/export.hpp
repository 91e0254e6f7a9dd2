#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prosim/tactile.hpp"
#include "prosim/trials.hpp"

namespace prosim::interface {

enum class ExportFormat { csv, svg };

ExportFormat export_format_from_string(const std::string& s);

/// Channel groups of the plot-ready export, in panel order.
inline constexpr std::array<std::string_view, 7> kChannelGroups{
    "u_c", "aperture", "p", "contact", "tactor_current", "D", "H"};

/// Time-aligned channel arrays; all vectors share one length.
struct ChannelArrays {
    std::vector<double> t;  // s
    std::vector<double> u_c;
    std::vector<double> aperture;
    std::vector<double> p;
    std::vector<tactile::Side> side;
    std::vector<double> x;  // meaningful only where side != none
    std::vector<double> tactor_current;
    std::vector<double> d;
    std::vector<double> h;

    std::size_t size() const { return t.size(); }
    friend bool operator==(const ChannelArrays&, const ChannelArrays&) = default;
};

ChannelArrays channels_from_trace(std::span<const trials::TraceRow> trace);

std::string channels_csv_header();
std::string format_channels_csv(const ChannelArrays& ch);
/// Throws trials::TraceIntegrityError on malformed input.
ChannelArrays parse_channels_csv(std::istream& in, const std::string& origin = "<channels>");

/// Stacked line plots, one panel per channel group. `placed_s` draws the
/// placement marker.
std::string render_channels_svg(const ChannelArrays& ch, std::optional<double> placed_s = std::nullopt);

/// Reads `trial_<id>.csv` (and its event log, when present, for the placement
/// marker) and writes the export. Without `out`, the file lands next to the
/// trace as `<stem>.channels.csv` or `<stem>.svg`.
std::filesystem::path export_trial(const std::filesystem::path& trace_csv, ExportFormat format,
                                   const std::optional<std::filesystem::path>& out = std::nullopt);

}  // namespace prosim::interface
