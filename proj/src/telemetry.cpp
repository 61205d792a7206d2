#include "dso/telemetry.hpp"

#include <charconv>
#include <limits>
#include <string>

#include "dso/error.hpp"

namespace dso {

namespace {

// Split into lines, accepting both \n and \r\n, skipping blank lines.
std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos
                                                     ? std::string_view::npos
                                                     : nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty()) lines.push_back(line);
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    return lines;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    for (;;) {
        std::size_t comma = line.find(',', pos);
        fields.push_back(line.substr(pos, comma == std::string_view::npos
                                              ? std::string_view::npos
                                              : comma - pos));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return fields;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

double parse_double(std::string_view field, std::size_t row) {
    field = trim(field);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size())
        throw Error(ErrorKind::SchemaMismatch,
                    "row " + std::to_string(row) + ": not a number: '" +
                        std::string(field) + "'");
    return value;
}

} // namespace

DcgmMetricVector load_dcgm_samples(std::string_view csv_text) {
    static constexpr std::string_view kHeader =
        "timestamp,SMACT,SMOCC,TENSO,DRAMA,FP64A,FP32A,FP16A,INTAC";

    auto lines = split_lines(csv_text);
    if (lines.empty() || trim(lines[0]) != kHeader)
        throw Error(ErrorKind::SchemaMismatch,
                    "expected header '" + std::string(kHeader) + "'");
    if (lines.size() < 2) throw Error(ErrorKind::EmptyTrace, "no data rows");

    Eigen::Matrix<double, 8, 1> sum = Eigen::Matrix<double, 8, 1>::Zero();
    for (std::size_t r = 1; r < lines.size(); ++r) {
        auto fields = split_fields(lines[r]);
        if (fields.size() != 9)
            throw Error(ErrorKind::SchemaMismatch,
                        "row " + std::to_string(r) + ": expected 9 fields, got " +
                            std::to_string(fields.size()));
        for (int m = 0; m < 8; ++m) {
            double v = parse_double(fields[static_cast<std::size_t>(m) + 1], r);
            if (v < 0.0 || v > 1.0)
                throw Error(ErrorKind::OutOfRange,
                            "row " + std::to_string(r) + ": metric value " +
                                std::to_string(v) + " outside [0, 1]");
            sum[m] += v;
        }
    }
    sum /= static_cast<double>(lines.size() - 1);

    DcgmMetricVector out;
    out.smact = sum[0];
    out.smocc = sum[1];
    out.tenso = sum[2];
    out.drama = sum[3];
    out.fp64a = sum[4];
    out.fp32a = sum[5];
    out.fp16a = sum[6];
    out.intac = sum[7];
    return out;
}

PowerTrace load_power_samples(std::string_view csv_text) {
    static constexpr std::string_view kHeader = "timestamp,power_w";

    auto lines = split_lines(csv_text);
    if (lines.empty() || trim(lines[0]) != kHeader)
        throw Error(ErrorKind::SchemaMismatch,
                    "expected header '" + std::string(kHeader) + "'");
    if (lines.size() < 2) throw Error(ErrorKind::EmptyTrace, "no data rows");

    PowerTrace trace;
    double sum = 0.0;
    double prev_ts = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 1; r < lines.size(); ++r) {
        auto fields = split_fields(lines[r]);
        if (fields.size() != 2)
            throw Error(ErrorKind::SchemaMismatch,
                        "row " + std::to_string(r) + ": expected 2 fields, got " +
                            std::to_string(fields.size()));
        double ts = parse_double(fields[0], r);
        double watts = parse_double(fields[1], r);
        if (!(watts > 0.0))
            throw Error(ErrorKind::NonPositivePower,
                        "row " + std::to_string(r) + ": power " +
                            std::to_string(watts) + " W must be positive");
        if (ts < prev_ts)
            throw Error(ErrorKind::OutOfRange,
                        "row " + std::to_string(r) + ": timestamps must be non-decreasing");
        prev_ts = ts;
        trace.samples.emplace_back(ts, watts);
        sum += watts;
    }
    trace.average_power = sum / static_cast<double>(trace.samples.size());
    return trace;
}

} // namespace dso
