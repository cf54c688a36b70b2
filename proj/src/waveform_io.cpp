#include "tcdseg/waveform_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace tcdseg {

using ordered_json = nlohmann::ordered_json;

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

// strtod-based: accepts "nan"/"inf" so the finiteness check can reject them
// with the right error instead of a generic parse failure.
bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* begin = s.c_str();
    char* end = nullptr;
    out = std::strtod(begin, &end);
    return end == begin + s.size();
}

}  // namespace

Recording load_recording(const std::filesystem::path& path, std::optional<double> fs_override) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw EmptyFile("empty file: " + path.string());

    auto header = split_csv(line);
    for (auto& h : header) std::transform(h.begin(), h.end(), h.begin(), [](unsigned char c) { return std::tolower(c); });

    auto col_of = [&](const std::string& name) -> int {
        auto it = std::find(header.begin(), header.end(), name);
        return it == header.end() ? -1 : static_cast<int>(it - header.begin());
    };
    const int t_col = col_of("t");
    const int abp_col = col_of("abp");
    const int cbfv_col = col_of("cbfv");
    if (abp_col < 0) throw MissingColumn("missing column 'abp' in " + path.string());
    if (cbfv_col < 0) throw MissingColumn("missing column 'cbfv' in " + path.string());
    if (t_col < 0 && !fs_override) throw MissingSampleRate("no time column and no sample rate given for " + path.string());

    std::vector<double> t, abp, cbfv;
    std::size_t row = 0;  // data row number, 1-based in diagnostics
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ++row;
        auto cells = split_csv(line);
        auto cell_value = [&](int col, const char* name) {
            if (col >= static_cast<int>(cells.size()))
                throw MissingColumn("row " + std::to_string(row) + ": missing '" + std::string(name) + "' cell");
            double v = 0.0;
            if (!parse_double(cells[col], v) || !std::isfinite(v))
                throw NonFiniteSample("row " + std::to_string(row) + ": non-finite '" + std::string(name) +
                                      "' value '" + cells[col] + "'");
            return v;
        };
        if (t_col >= 0) t.push_back(cell_value(t_col, "t"));
        abp.push_back(cell_value(abp_col, "abp"));
        cbfv.push_back(cell_value(cbfv_col, "cbfv"));
    }
    if (abp.empty()) throw EmptyFile("no data rows in " + path.string());

    for (std::size_t i = 1; i < t.size(); ++i)
        if (!(t[i] > t[i - 1]))
            throw NonMonotoneTime("time column not strictly increasing at row " + std::to_string(i + 1));

    double fs_hz = 0.0;
    if (fs_override) {
        fs_hz = *fs_override;
    } else {
        if (t.size() < 2) throw MissingSampleRate("cannot infer sample rate from a single row in " + path.string());
        fs_hz = static_cast<double>(t.size() - 1) / (t.back() - t.front());
    }

    Recording rec;
    rec.cbfv = Channel{std::move(cbfv), SampleRate(fs_hz), ChannelKind::CBFV};
    rec.abp = Channel{std::move(abp), SampleRate(fs_hz), ChannelKind::ABP};
    return rec;
}

void write_recording_csv(const Recording& rec, const std::filesystem::path& path) {
    if (!rec.is_aligned()) throw NotAligned("write_recording_csv needs an aligned recording");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "t,abp,cbfv\n";
    char buf[128];
    const double fs = rec.cbfv.fs.hz;
    for (std::size_t i = 0; i < rec.cbfv.samples.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g\n", static_cast<double>(i) / fs,
                      rec.abp.samples[i], rec.cbfv.samples[i]);
        out << buf;
    }
    if (!out) throw IoError("failed writing " + path.string());
}

Channel resample_channel(const Channel& ch, SampleRate target) {
    if (ch.samples.empty()) throw EmptyFile("resample of empty channel");
    const std::size_t n = ch.samples.size();
    if (n == 1) return Channel{{ch.samples[0]}, target, ch.kind};

    const double duration = static_cast<double>(n - 1) / ch.fs.hz;
    // +1e-9 guards against the grid end landing just below an integer.
    const auto m = static_cast<std::size_t>(std::floor(duration * target.hz + 1e-9)) + 1;
    const double step = ch.fs.hz / target.hz;  // input samples per output sample

    std::vector<double> out(m);
    for (std::size_t k = 0; k < m; ++k) {
        const double pos = static_cast<double>(k) * step;
        auto i = static_cast<std::size_t>(pos);
        if (i >= n - 1) {
            out[k] = ch.samples[n - 1];
            continue;
        }
        const double frac = pos - static_cast<double>(i);
        out[k] = ch.samples[i] + frac * (ch.samples[i + 1] - ch.samples[i]);
    }
    out[0] = ch.samples[0];
    return Channel{std::move(out), target, ch.kind};
}

Recording align(const Recording& rec) {
    if (rec.cbfv.samples.empty() || rec.abp.samples.empty())
        throw EmptyFile("align needs non-empty channels");

    Recording out = rec;
    if (out.cbfv.fs != out.abp.fs) {
        if (out.cbfv.fs.hz < out.abp.fs.hz)
            out.cbfv = resample_channel(out.cbfv, out.abp.fs);
        else
            out.abp = resample_channel(out.abp, out.cbfv.fs);
    }
    const std::size_t n = std::min(out.cbfv.samples.size(), out.abp.samples.size());
    out.cbfv.samples.resize(n);
    out.abp.samples.resize(n);
    return out;
}

namespace {

ordered_json config_to_json(const ConfigSnapshot& c) {
    ordered_json j;
    j["type"] = "config";
    j["fs"] = c.fs_hz;
    j["lowpass_cutoff_hz"] = c.onset.lowpass_cutoff_hz;
    j["ssf_window_s"] = c.onset.ssf_window_s;
    j["refractory_s"] = c.onset.refractory_s;
    j["learn_s"] = c.onset.learn_s;
    j["cbfv_scale"] = c.onset.cbfv_scale;
    j["threshold_fraction"] = c.onset.threshold_fraction;
    j["v_min"] = c.pipeline.v_min;
    j["v_max"] = c.pipeline.v_max;
    j["window_s"] = c.pipeline.window_s;
    j["band_lo_hz"] = c.pipeline.band_lo_hz;
    j["band_hi_hz"] = c.pipeline.band_hi_hz;
    j["r_min"] = c.pipeline.r_min;
    j["nmse_max"] = c.pipeline.nmse_max;
    j["template_len"] = c.pipeline.template_len;
    j["psd_segment_s"] = c.pipeline.psd_segment_s;
    j["psd_overlap"] = c.pipeline.psd_overlap;
    return j;
}

ConfigSnapshot config_from_json(const ordered_json& j) {
    ConfigSnapshot c;
    c.fs_hz = j.at("fs").get<double>();
    c.onset.lowpass_cutoff_hz = j.at("lowpass_cutoff_hz").get<double>();
    c.onset.ssf_window_s = j.at("ssf_window_s").get<double>();
    c.onset.refractory_s = j.at("refractory_s").get<double>();
    c.onset.learn_s = j.at("learn_s").get<double>();
    c.onset.cbfv_scale = j.at("cbfv_scale").get<double>();
    c.onset.threshold_fraction = j.at("threshold_fraction").get<double>();
    c.pipeline.v_min = j.at("v_min").get<double>();
    c.pipeline.v_max = j.at("v_max").get<double>();
    c.pipeline.window_s = j.at("window_s").get<double>();
    c.pipeline.band_lo_hz = j.at("band_lo_hz").get<double>();
    c.pipeline.band_hi_hz = j.at("band_hi_hz").get<double>();
    c.pipeline.r_min = j.at("r_min").get<double>();
    c.pipeline.nmse_max = j.at("nmse_max").get<double>();
    c.pipeline.template_len = j.at("template_len").get<int>();
    c.pipeline.psd_segment_s = j.at("psd_segment_s").get<double>();
    c.pipeline.psd_overlap = j.at("psd_overlap").get<double>();
    return c;
}

const char* verdict_str(Verdict v) { return v == Verdict::Good ? "good" : "artifact"; }

Verdict verdict_from(const std::string& s) {
    if (s == "good") return Verdict::Good;
    if (s == "artifact") return Verdict::Artifact;
    throw ParseError("unknown verdict '" + s + "'");
}

}  // namespace

void write_annotations(const AnnotationSet& ann, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());

    out << config_to_json(ann.config).dump() << '\n';
    for (const auto& b : ann.beats) {
        ordered_json j;
        j["type"] = "beat";
        j["onset"] = b.onset;
        j["end"] = b.end;
        j["label"] = verdict_str(b.label.verdict);
        if (b.label.stage) j["stage"] = *b.label.stage;
        if (b.label.metric)
            j["metric"] = *b.label.metric;
        else
            j["metric"] = nullptr;
        out << j.dump() << '\n';
    }
    for (const auto& w : ann.windows) {
        ordered_json j;
        j["type"] = "window";
        j["start"] = w.start;
        j["end"] = w.end;
        j["r"] = w.r;
        j["verdict"] = verdict_str(w.verdict);
        out << j.dump() << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

AnnotationSet read_annotations(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());

    AnnotationSet ann;
    bool have_config = false;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
        }
        const std::string type = j.value("type", "");
        if (type == "config") {
            ann.config = config_from_json(j);
            have_config = true;
        } else if (type == "beat") {
            AnnotatedBeat b;
            b.onset = j.at("onset").get<SampleIndex>();
            b.end = j.at("end").get<SampleIndex>();
            b.label.verdict = verdict_from(j.at("label").get<std::string>());
            if (j.contains("stage")) b.label.stage = j.at("stage").get<int>();
            if (j.contains("metric") && !j.at("metric").is_null())
                b.label.metric = j.at("metric").get<double>();
            ann.beats.push_back(b);
        } else if (type == "window") {
            WindowVerdict w;
            w.start = j.at("start").get<SampleIndex>();
            w.end = j.at("end").get<SampleIndex>();
            w.r = j.at("r").get<double>();
            w.verdict = verdict_from(j.at("verdict").get<std::string>());
            ann.windows.push_back(w);
        } else {
            throw ParseError("line " + std::to_string(lineno) + ": unknown record type '" + type + "'");
        }
    }
    if (!have_config) throw ParseError("no config header in " + path.string());
    for (std::size_t i = 0; i < ann.beats.size(); ++i) {
        if (ann.beats[i].onset >= ann.beats[i].end)
            throw ParseError("beat " + std::to_string(i) + " is empty or inverted");
        if (i > 0 && ann.beats[i].onset < ann.beats[i - 1].end)
            throw ParseError("beat " + std::to_string(i) + " overlaps its predecessor");
    }
    for (std::size_t i = 1; i < ann.windows.size(); ++i)
        if (ann.windows[i].start < ann.windows[i - 1].end)
            throw ParseError("window " + std::to_string(i) + " overlaps its predecessor");
    return ann;
}

}  // namespace tcdseg
