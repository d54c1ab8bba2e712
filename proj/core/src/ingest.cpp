#include "gattf/ingest.hpp"

#include "gattf/errors.hpp"
#include "gattf/log.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

namespace gattf {

namespace {

bool parse_int(std::string_view s, int& out)
{
    if (s.empty()) {
        return false;
    }
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size();
}

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

} // namespace

Timestamp parse_iso8601(std::string_view text)
{
    using namespace std::chrono;
    std::string_view s = trim(text);
    if (s.ends_with('Z')) {
        s.remove_suffix(1);
    } else if (s.ends_with("+00:00")) {
        s.remove_suffix(6);
    }
    // YYYY-MM-DDTHH:MM[:SS]
    if (s.size() != 16 && s.size() != 19) {
        throw ValidationError("bad timestamp '" + std::string(text) + "'");
    }
    if (s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':' ||
        (s.size() == 19 && s[16] != ':')) {
        throw ValidationError("bad timestamp '" + std::string(text) + "'");
    }
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
    if (!parse_int(s.substr(0, 4), y) || !parse_int(s.substr(5, 2), mo) || !parse_int(s.substr(8, 2), d) ||
        !parse_int(s.substr(11, 2), h) || !parse_int(s.substr(14, 2), mi) ||
        (s.size() == 19 && !parse_int(s.substr(17, 2), sec))) {
        throw ValidationError("bad timestamp '" + std::string(text) + "'");
    }
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || sec > 59 || h < 0 || mi < 0 || sec < 0) {
        throw ValidationError("bad timestamp '" + std::string(text) + "'");
    }
    const auto days = sys_days{ymd}.time_since_epoch().count();
    return static_cast<Timestamp>(days) * 86400 + h * 3600 + mi * 60 + sec;
}

std::string format_iso8601(Timestamp t)
{
    using namespace std::chrono;
    Timestamp days = t / 86400;
    Timestamp rem = t % 86400;
    if (rem < 0) {
        rem += 86400;
        --days;
    }
    const year_month_day ymd{sys_days{std::chrono::days{days}}};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(rem / 3600),
                  static_cast<int>(rem % 3600 / 60), static_cast<int>(rem % 60));
    return buf;
}

std::string format_double(double v)
{
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

SensorDataset read_csv(std::istream& in)
{
    struct Cell {
        double value;
        bool observed;
    };
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) {
        throw FormatError("empty CSV input");
    }
    ++line_no;
    if (trim(line) != "timestamp,sensor_id,flow") {
        throw ParseError(line_no, "expected header 'timestamp,sensor_id,flow'");
    }

    std::map<std::string, std::map<Timestamp, Cell>> rows;
    std::set<Timestamp> stamps;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view l = trim(line);
        if (l.empty()) {
            continue;
        }
        const auto c1 = l.find(',');
        const auto c2 = c1 == std::string_view::npos ? c1 : l.find(',', c1 + 1);
        if (c2 == std::string_view::npos || l.find(',', c2 + 1) != std::string_view::npos) {
            throw ParseError(line_no, "expected 3 fields");
        }
        Timestamp t = 0;
        try {
            t = parse_iso8601(l.substr(0, c1));
        } catch (const ValidationError& e) {
            throw ParseError(line_no, e.what());
        }
        const std::string id(trim(l.substr(c1 + 1, c2 - c1 - 1)));
        if (id.empty()) {
            throw ParseError(line_no, "empty sensor_id");
        }
        const std::string_view flow = trim(l.substr(c2 + 1));
        Cell cell{0.0, false};
        if (!flow.empty()) {
            auto [p, ec] = std::from_chars(flow.data(), flow.data() + flow.size(), cell.value);
            if (ec != std::errc{} || p != flow.data() + flow.size() || !std::isfinite(cell.value)) {
                throw ParseError(line_no, "bad flow '" + std::string(flow) + "'");
            }
            if (cell.value < 0.0) {
                throw ParseError(line_no, "negative flow " + std::string(flow));
            }
            cell.observed = true;
        }
        auto& series = rows[id];
        if (!series.insert_or_assign(t, cell).second) {
            warn("line " + std::to_string(line_no) + ": duplicate row for " + id + " at " + format_iso8601(t) +
                 "; keeping the last one");
        }
        stamps.insert(t);
    }
    if (rows.empty()) {
        throw FormatError("CSV contains no data rows");
    }

    const Timestamp t0 = *stamps.begin();
    const Timestamp t1 = *stamps.rbegin();
    Timestamp step = 0;
    for (auto it = std::next(stamps.begin()); it != stamps.end(); ++it) {
        const Timestamp d = *it - *std::prev(it);
        step = step == 0 ? d : std::min(step, d);
    }
    if (step == 0) {
        // A single time point; the grid step is unknowable, pick one minute.
        step = 60;
    }
    for (Timestamp t : stamps) {
        if ((t - t0) % step != 0) {
            throw FormatError("timestamp " + format_iso8601(t) + " is off the " + std::to_string(step) +
                              "-second grid starting at " + format_iso8601(t0));
        }
    }
    const auto length = static_cast<std::size_t>((t1 - t0) / step + 1);

    std::vector<SensorSeries> series;
    for (const auto& [id, cells] : rows) {
        std::vector<double> values(length, 0.0);
        Mask observed(length, 0);
        for (const auto& [t, cell] : cells) {
            const auto i = static_cast<std::size_t>((t - t0) / step);
            values[i] = cell.value;
            observed[i] = cell.observed ? 1 : 0;
        }
        series.emplace_back(SensorId(id), t0, step, std::move(values), std::move(observed));
    }
    return SensorDataset(std::move(series));
}

SensorDataset parse_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open " + path.string());
    }
    return read_csv(in);
}

void write_csv(std::ostream& out, const SensorDataset& dataset)
{
    out << "timestamp,sensor_id,flow\n";
    for (std::size_t t = 0; t < dataset.length(); ++t) {
        const std::string ts = format_iso8601(dataset.start() + static_cast<Timestamp>(t) * dataset.step());
        for (const auto& s : dataset.series()) {
            out << ts << ',' << s.id().str() << ',';
            if (s.is_observed(t)) {
                out << format_double(s.value(t));
            }
            out << '\n';
        }
    }
}

void write_csv(const std::filesystem::path& path, const SensorDataset& dataset)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ValidationError("cannot write " + path.string());
    }
    write_csv(out, dataset);
    if (!out) {
        throw Error("write failed: " + path.string());
    }
}

SensorDataset resample(const SensorDataset& dataset, std::size_t factor)
{
    if (factor == 0) {
        throw ValidationError("resample factor must be at least 1");
    }
    if (factor == 1) {
        return dataset;
    }
    const std::size_t buckets = dataset.length() / factor;
    if (buckets == 0) {
        throw InsufficientDataError("series of length " + std::to_string(dataset.length()) +
                                    " is shorter than one bucket of " + std::to_string(factor));
    }
    if (dataset.length() % factor != 0) {
        warn("resample: dropping a trailing partial bucket of " + std::to_string(dataset.length() % factor) +
             " steps");
    }
    std::vector<SensorSeries> out;
    for (const auto& s : dataset.series()) {
        std::vector<double> values(buckets, 0.0);
        Mask observed(buckets, 0);
        for (std::size_t b = 0; b < buckets; ++b) {
            double sum = 0.0;
            std::size_t n = 0;
            for (std::size_t i = b * factor; i < (b + 1) * factor; ++i) {
                if (s.is_observed(i)) {
                    sum += s.value(i);
                    ++n;
                }
            }
            if (n > 0) {
                values[b] = sum / static_cast<double>(n);
                observed[b] = 1;
            }
        }
        out.emplace_back(s.id(), s.start(), s.step() * static_cast<std::int64_t>(factor), std::move(values),
                         std::move(observed));
    }
    return SensorDataset(std::move(out));
}

} // namespace gattf
