// tcdseg: segment CBFV recordings into good and artifact beats.
//
// Subcommands:
//   annotate  classify a CSV recording, write JSON-lines annotations
//   synth     generate a synthetic recording with ground truth
//   eval      score annotations against a ground-truth sidecar
//   beats     print detected beat onsets
//
// Exit codes: 0 ok, 2 input/config error, 3 evaluation mismatch, 1 internal.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tcdseg/beat_detection.hpp"
#include "tcdseg/quality_pipeline.hpp"
#include "tcdseg/synthetic.hpp"
#include "tcdseg/waveform_io.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_internal = 1;
constexpr int exit_input = 2;
constexpr int exit_eval = 3;

struct AnnotateArgs {
    std::string input;
    std::string output;
    std::optional<double> fs;
    std::string band;  // "lo:hi"
    std::string plot_data;
    tcdseg::OnsetConfig onset;
    tcdseg::PipelineConfig pipeline;
};

void parse_band(const std::string& band, tcdseg::PipelineConfig& cfg) {
    if (band.empty()) return;
    const auto colon = band.find(':');
    if (colon == std::string::npos)
        throw tcdseg::ParseError("--band expects lo:hi, got '" + band + "'");
    try {
        cfg.band_lo_hz = std::stod(band.substr(0, colon));
        cfg.band_hi_hz = std::stod(band.substr(colon + 1));
    } catch (const std::exception&) {
        throw tcdseg::ParseError("--band expects numeric lo:hi, got '" + band + "'");
    }
}

void add_onset_flags(CLI::App* cmd, tcdseg::OnsetConfig& cfg) {
    cmd->add_option("--cbfv-scale", cfg.cbfv_scale, "CBFV scale factor applied before onset detection");
    cmd->add_option("--lowpass-cutoff", cfg.lowpass_cutoff_hz, "Detector low-pass cutoff (Hz)");
    cmd->add_option("--ssf-window-sec", cfg.ssf_window_s, "Slope-sum window (s)");
    cmd->add_option("--refractory-sec", cfg.refractory_s, "Minimum onset spacing (s)");
    cmd->add_option("--learn-sec", cfg.learn_s, "Adaptive threshold horizon (s)");
    cmd->add_option("--threshold-fraction", cfg.threshold_fraction, "Fraction of mean SSF peak");
}

void add_pipeline_flags(CLI::App* cmd, AnnotateArgs& a) {
    cmd->add_option("--v-min", a.pipeline.v_min, "Stage-1 lower velocity bound (cm/s)");
    cmd->add_option("--v-max", a.pipeline.v_max, "Stage-1 upper velocity bound (cm/s)");
    cmd->add_option("--window-sec", a.pipeline.window_s, "Stage-2 window length (s)");
    cmd->add_option("--band", a.band, "Stage-2 correlation band, lo:hi in Hz");
    cmd->add_option("--r-min", a.pipeline.r_min, "Stage-2 correlation threshold");
    cmd->add_option("--nmse-max", a.pipeline.nmse_max, "Stage-3 NMSE threshold");
    cmd->add_option("--template-len", a.pipeline.template_len, "Template length (samples)");
    cmd->add_option("--psd-segment-sec", a.pipeline.psd_segment_s, "Welch segment length (s)");
    cmd->add_option("--psd-overlap", a.pipeline.psd_overlap, "Welch segment overlap in [0,1)");
}

void write_plot_data(const tcdseg::Recording& rec, const tcdseg::AnnotationSet& ann,
                     const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw tcdseg::IoError("cannot write " + path.string());
    std::vector<const char*> label(rec.cbfv.samples.size(), "unclassifiable");
    for (const auto& b : ann.beats) {
        const char* v = b.label.is_artifact() ? "artifact" : b.label.is_good() ? "good" : "unclassifiable";
        for (tcdseg::SampleIndex k = b.onset; k < b.end; ++k) label[static_cast<std::size_t>(k)] = v;
    }
    out << "sample_index,cbfv,label\n";
    char buf[96];
    for (std::size_t k = 0; k < label.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%zu,%.10g,", k, rec.cbfv.samples[k]);
        out << buf << label[k] << '\n';
    }
}

int cmd_annotate(const AnnotateArgs& args) {
    AnnotateArgs a = args;
    parse_band(a.band, a.pipeline);
    const tcdseg::Recording rec = tcdseg::align(tcdseg::load_recording(a.input, a.fs));
    const tcdseg::AnnotationSet ann = tcdseg::classify(rec, a.onset, a.pipeline);
    tcdseg::write_annotations(ann, a.output);
    if (!a.plot_data.empty()) write_plot_data(rec, ann, a.plot_data);

    std::size_t good = 0, artifact = 0, unclassifiable = 0;
    for (const auto& b : ann.beats) {
        if (b.label.is_artifact()) ++artifact;
        else if (b.label.is_good()) ++good;
        else ++unclassifiable;
    }
    std::cerr << "annotated " << ann.beats.size() << " beats (" << good << " good, " << artifact
              << " artifact, " << unclassifiable << " unclassifiable), " << ann.windows.size()
              << " windows -> " << a.output << "\n";
    return exit_ok;
}

struct SynthArgs {
    std::string out_prefix;
    std::string preset = "clean";
    double duration_s = 300.0;
    double fs = 125.0;
    std::uint32_t seed = 1;
    double dropout = 0.0;
    double spike = 0.0;
    double decouple = 0.0;
    double distort = 0.0;
    tcdseg::PulseModel model;
};

int cmd_synth(const SynthArgs& a) {
    if (a.preset != "clean") throw tcdseg::InvalidModel("unknown preset '" + a.preset + "'");

    tcdseg::SyntheticRecording syn = tcdseg::gen_recording(a.model, a.duration_s, a.fs, a.seed);
    // Derived seeds keep the artifact draws independent of each other.
    tcdseg::inject(syn.rec, syn.truth, {tcdseg::ArtifactKind::Dropout, a.dropout, a.seed + 101});
    tcdseg::inject(syn.rec, syn.truth, {tcdseg::ArtifactKind::Spike, a.spike, a.seed + 202});
    tcdseg::inject(syn.rec, syn.truth, {tcdseg::ArtifactKind::Decouple, a.decouple, a.seed + 303});
    tcdseg::inject(syn.rec, syn.truth, {tcdseg::ArtifactKind::MorphDistort, a.distort, a.seed + 404});

    const std::string csv = a.out_prefix + ".csv";
    const std::string truth = a.out_prefix + ".truth.jsonl";
    tcdseg::write_recording_csv(syn.rec, csv);
    tcdseg::write_truth(syn.truth, truth);

    std::size_t artifacts = 0;
    for (const auto& b : syn.truth.beats) artifacts += b.artifact ? 1 : 0;
    std::cerr << "wrote " << csv << " and " << truth << " (" << syn.truth.beats.size() << " beats, "
              << artifacts << " true artifacts)\n";
    return exit_ok;
}

int cmd_eval(const std::string& ann_path, const std::string& truth_path) {
    const tcdseg::AnnotationSet ann = tcdseg::read_annotations(ann_path);
    const tcdseg::GroundTruth truth = tcdseg::read_truth(truth_path);
    const tcdseg::ConfusionStats s = tcdseg::evaluate(ann, truth);

    nlohmann::ordered_json j;
    j["tp"] = s.tp;
    j["tn"] = s.tn;
    j["fp"] = s.fp;
    j["fn"] = s.fn;
    j["disagreement"] = s.disagreement;
    j["sensitivity"] = s.sensitivity;
    j["specificity"] = s.specificity;
    std::cout << j.dump() << "\n";
    return exit_ok;
}

int cmd_beats(const std::string& input, std::optional<double> fs, const tcdseg::OnsetConfig& cfg) {
    const tcdseg::Recording rec = tcdseg::align(tcdseg::load_recording(input, fs));
    const auto onsets = tcdseg::detect_onsets(tcdseg::scale_cbfv(rec.cbfv, cfg.cbfv_scale), cfg);
    for (auto o : onsets) std::cout << o << "\n";
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Beat-by-beat quality segmentation of CBFV/ABP recordings"};
    app.require_subcommand(1);

    AnnotateArgs ann_args;
    auto* annotate = app.add_subcommand("annotate", "Classify a recording into good/artifact beats");
    annotate->add_option("input", ann_args.input, "Input CSV (t,abp,cbfv or abp,cbfv)")->required();
    annotate->add_option("-o,--out", ann_args.output, "Output annotation file (JSON lines)")->required();
    annotate->add_option("--fs", ann_args.fs, "Sample rate override (Hz)");
    annotate->add_option("--plot-data", ann_args.plot_data, "Also write per-sample label CSV");
    add_onset_flags(annotate, ann_args.onset);
    add_pipeline_flags(annotate, ann_args);

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic recording + ground truth");
    synth->add_option("--out-prefix", synth_args.out_prefix, "Prefix for .csv/.truth.jsonl outputs")->required();
    synth->add_option("--preset", synth_args.preset, "Pulse preset (clean)");
    synth->add_option("--duration", synth_args.duration_s, "Duration (s)");
    synth->add_option("--fs", synth_args.fs, "Sample rate (Hz)");
    synth->add_option("--seed", synth_args.seed, "RNG seed");
    synth->add_option("--hr", synth_args.model.hr_bpm, "Heart rate (bpm)");
    synth->add_option("--hr-jitter", synth_args.model.hr_jitter, "Relative period jitter [0,1)");
    synth->add_option("--dropout", synth_args.dropout, "Fraction of beats clamped to near zero");
    synth->add_option("--spike", synth_args.spike, "Fraction of beats given a >300 cm/s impulse");
    synth->add_option("--decouple", synth_args.decouple, "Fraction of 8 s windows replaced by noise");
    synth->add_option("--distort", synth_args.distort, "Fraction of beats morphologically distorted");

    std::string eval_ann, eval_truth;
    auto* eval = app.add_subcommand("eval", "Score annotations against ground truth");
    eval->add_option("annotations", eval_ann, "Annotation JSON-lines file")->required();
    eval->add_option("truth", eval_truth, "Ground-truth JSON-lines file")->required();

    std::string beats_input;
    std::optional<double> beats_fs;
    tcdseg::OnsetConfig beats_cfg;
    auto* beats = app.add_subcommand("beats", "Print detected beat onset indices");
    beats->add_option("input", beats_input, "Input CSV")->required();
    beats->add_option("--fs", beats_fs, "Sample rate override (Hz)");
    add_onset_flags(beats, beats_cfg);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_input;
    }

    try {
        if (annotate->parsed()) return cmd_annotate(ann_args);
        if (synth->parsed()) return cmd_synth(synth_args);
        if (eval->parsed()) return cmd_eval(eval_ann, eval_truth);
        if (beats->parsed()) return cmd_beats(beats_input, beats_fs, beats_cfg);
    } catch (const tcdseg::NoOverlap& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_eval;
    } catch (const tcdseg::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_input;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return exit_internal;
    }
    return exit_internal;
}
