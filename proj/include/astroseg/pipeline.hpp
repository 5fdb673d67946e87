#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "astroseg/errors.hpp"
#include "astroseg/features.hpp"
#include "astroseg/fits.hpp"
#include "astroseg/image.hpp"
#include "astroseg/metrics.hpp"
#include "astroseg/mlp.hpp"
#include "astroseg/pgm.hpp"
#include "astroseg/preprocess.hpp"
#include "astroseg/segmentation.hpp"
#include "astroseg/synth.hpp"

namespace astroseg {

// End-to-end orchestration: ingest -> enhance -> segment -> extract regions ->
// featurize -> train/classify. Every stage output is snapped to a 16-bit grid
// and written as a PGM, so feeding an emitted intermediate back into the next
// stage reproduces the pipeline's own artifact byte for byte.

struct NotConverged : NumericError {
    using NumericError::NumericError;
};

struct ErosionConfig {
    enum class Shape { square, cross };
    Shape shape = Shape::square;
    int size = 3;
    int iterations = 1;
};

struct SegmentationConfig {
    enum class Mode { global_iterative, local_adaptive };
    Mode mode = Mode::global_iterative;
    double epsilon = 1e-4;
    int max_iter = 100;
    int window = 15;
    double bias = 0.0;
    std::optional<double> forced_threshold; // bypasses the iteration entirely
};

struct BpnnConfig {
    TrainConfig train;
    std::vector<int> layer_sizes{7, 10, 1};
    double cutoff = 0.5;
};

struct PipelineConfig {
    double log_c = default_log_c;
    ErosionConfig erosion;
    double sigma = 1.0;
    SegmentationConfig segmentation;
    std::size_t min_region_pixels = 5;
    BpnnConfig bpnn;
};

inline void validate(const PipelineConfig& cfg) {
    if (!(cfg.log_c > 0.0))
        throw InvalidArgument("log-c must be positive");
    if (cfg.erosion.size < 1 || cfg.erosion.size % 2 == 0)
        throw InvalidArgument("erosion size must be odd and positive");
    if (cfg.erosion.iterations < 0)
        throw InvalidArgument("erosion iterations must be non-negative");
    if (!(cfg.sigma > 0.0))
        throw InvalidArgument("sigma must be positive");
    if (!(cfg.segmentation.epsilon > 0.0))
        throw InvalidArgument("epsilon must be positive");
    if (cfg.segmentation.max_iter < 1)
        throw InvalidArgument("max-iter must be at least 1");
    if (cfg.segmentation.window < 3 || cfg.segmentation.window % 2 == 0)
        throw InvalidArgument("window must be odd and at least 3");
    if (cfg.segmentation.bias < -1.0 || cfg.segmentation.bias > 1.0)
        throw InvalidArgument("bias must lie in [-1, 1]");
    if (cfg.segmentation.forced_threshold &&
        (*cfg.segmentation.forced_threshold < 0.0 || *cfg.segmentation.forced_threshold > 1.0))
        throw InvalidArgument("forced threshold must lie in [0, 1]");
    if (cfg.min_region_pixels < 1)
        throw InvalidArgument("min-pixels must be at least 1");
    if (!(cfg.bpnn.cutoff > 0.0 && cfg.bpnn.cutoff < 1.0))
        throw InvalidArgument("cutoff must lie strictly inside (0, 1)");
    if (cfg.bpnn.layer_sizes.size() < 2)
        throw InvalidArgument("network needs at least two layers");
    if (!(cfg.bpnn.train.learning_rate > 0.0))
        throw InvalidArgument("learning rate must be positive");
    if (cfg.bpnn.train.max_epochs < 1)
        throw InvalidArgument("epochs must be at least 1");
    if (cfg.bpnn.train.patience < 1)
        throw InvalidArgument("patience must be at least 1");
}

namespace detail {

template <class Fn>
auto with_stage(const char* name, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const InvalidArgument& e) {
        throw InvalidArgument(std::string(name) + ": " + e.what());
    } catch (const NumericError& e) {
        throw NumericError(std::string(name) + ": " + e.what());
    } catch (const FormatError& e) {
        throw FormatError(std::string(name) + ": " + e.what());
    }
}

inline constexpr int kStageMaxval = 65535;

} // namespace detail

struct PipelineStages {
    Image log_image;
    Image eroded;
    Image smoothed;
    Mask mask;
    std::optional<ThresholdTrace> trace;       // global mode, unforced
    std::optional<double> applied_threshold;   // global mode (iterated or forced)
};

// The pure part of a segmentation run; input must already be a normalized Image.
inline PipelineStages segment_image(const PipelineConfig& cfg, const Image& input) {
    validate(cfg);
    PipelineStages st;

    st.log_image = detail::with_stage("log transform", [&] {
        return quantize(log_transform(input, cfg.log_c), detail::kStageMaxval);
    });

    st.eroded = detail::with_stage("erosion", [&] {
        StructuringElement se = cfg.erosion.shape == ErosionConfig::Shape::square
                                    ? StructuringElement::square(cfg.erosion.size)
                                    : StructuringElement::cross(cfg.erosion.size);
        Image img = st.log_image;
        for (int i = 0; i < cfg.erosion.iterations; ++i)
            img = erode(img, se);
        return quantize(img, detail::kStageMaxval);
    });

    st.smoothed = detail::with_stage("gaussian smoothing", [&] {
        return quantize(gaussian_smooth(st.eroded, cfg.sigma), detail::kStageMaxval);
    });

    detail::with_stage("segmentation", [&] {
        if (cfg.segmentation.mode == SegmentationConfig::Mode::local_adaptive) {
            st.mask = local_adaptive_threshold(st.smoothed, cfg.segmentation.window,
                                               cfg.segmentation.bias);
        } else if (cfg.segmentation.forced_threshold) {
            st.applied_threshold = *cfg.segmentation.forced_threshold;
            st.mask = apply_global_threshold(st.smoothed, *st.applied_threshold);
        } else {
            double t0 = initial_threshold(st.smoothed);
            st.trace = iterate_threshold(st.smoothed, t0, cfg.segmentation.epsilon,
                                         cfg.segmentation.max_iter);
            st.applied_threshold = final_threshold(*st.trace);
            st.mask = apply_global_threshold(st.smoothed, *st.applied_threshold);
        }
        return 0;
    });
    return st;
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw FormatError("cannot open " + path.string());
    std::string content((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return {content.begin(), content.end()};
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f)
        throw FormatError("cannot write " + path.string());
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline void write_file(const std::filesystem::path& path, std::string_view text) {
    write_file(path, std::span<const std::uint8_t>(
                         reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline nlohmann::json to_json(const ThresholdTrace& trace) {
    nlohmann::json steps = nlohmann::json::array();
    for (const ThresholdStep& s : trace.steps)
        steps.push_back({{"iteration", s.iteration}, {"threshold", s.threshold}, {"error", s.error}});
    return {{"t0", trace.t0}, {"converged", trace.converged}, {"steps", steps}};
}

struct ScoredRegion {
    Region region;
    double score = 0.0;
    bool predicted = false;
};

struct DetectionReport {
    std::string source_file;
    int width = 0, height = 0;
    std::optional<ThresholdTrace> trace;
    std::vector<ScoredRegion> regions;
    std::optional<MetricsReport> metrics;
    std::size_t blank_pixels = 0;
    bool has_extensions = false; // surfaced as a CLI warning, not serialized
};

inline nlohmann::json to_json(const ScoredRegion& sr) {
    const Region& r = sr.region;
    return {{"label", r.label},
            {"pixel_count", r.pixel_count},
            {"bbox",
             {{"x_min", r.x_min}, {"y_min", r.y_min}, {"x_max", r.x_max}, {"y_max", r.y_max}}},
            {"centroid", {r.centroid_x, r.centroid_y}},
            {"features", r.features},
            {"score", sr.score},
            {"predicted", sr.predicted}};
}

inline nlohmann::json to_json(const DetectionReport& rep) {
    nlohmann::json j;
    j["source_file"] = rep.source_file;
    j["image_dims"] = {{"width", rep.width}, {"height", rep.height}};
    j["blank_pixels"] = rep.blank_pixels;
    if (rep.trace)
        j["trace"] = to_json(*rep.trace);
    nlohmann::json regions = nlohmann::json::array();
    for (const ScoredRegion& sr : rep.regions)
        regions.push_back(to_json(sr));
    j["regions"] = regions;
    if (rep.metrics)
        j["metrics"] = to_json(*rep.metrics);
    return j;
}

struct SegmentOutcome {
    std::string source_file;
    int width = 0, height = 0;
    Image input; // normalized ingest
    PipelineStages stages;
    std::optional<MetricsReport> metrics;
    std::size_t blank_pixels = 0;
    bool has_extensions = false;
};

namespace detail {

inline void write_stage_artifacts(const SegmentOutcome& oc, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_file(dir / "01_log.pgm", write_pgm(oc.stages.log_image, kStageMaxval));
    write_file(dir / "02_eroded.pgm", write_pgm(oc.stages.eroded, kStageMaxval));
    write_file(dir / "03_smoothed.pgm", write_pgm(oc.stages.smoothed, kStageMaxval));
    write_file(dir / "04_mask.pgm", write_mask_pgm(oc.stages.mask));
    if (oc.stages.trace)
        write_file(dir / "trace.csv", trace_to_csv(*oc.stages.trace));
}

inline nlohmann::json segment_report_json(const SegmentOutcome& oc) {
    nlohmann::json j;
    j["source_file"] = oc.source_file;
    j["image_dims"] = {{"width", oc.width}, {"height", oc.height}};
    j["blank_pixels"] = oc.blank_pixels;
    j["foreground_pixels"] = oc.stages.mask.foreground_count();
    if (oc.stages.trace)
        j["trace"] = to_json(*oc.stages.trace);
    if (oc.stages.applied_threshold)
        j["threshold"] = *oc.stages.applied_threshold;
    if (oc.metrics)
        j["metrics"] = to_json(*oc.metrics);
    return j;
}

} // namespace detail

inline SegmentOutcome run_segment(const PipelineConfig& cfg, const std::filesystem::path& fits_path,
                                  const std::optional<std::filesystem::path>& truth_pgm = {},
                                  const std::optional<std::filesystem::path>& out_dir = {},
                                  bool write_report = true) {
    SegmentOutcome oc;
    oc.source_file = fits_path.string();
    FitsImage parsed = detail::with_stage("fits ingest", [&] { return parse_fits(read_file(fits_path)); });
    oc.width = parsed.image.width;
    oc.height = parsed.image.height;
    oc.blank_pixels = parsed.blank_pixels;
    oc.has_extensions = parsed.has_extensions;
    oc.input = std::move(parsed.image);
    oc.stages = segment_image(cfg, oc.input);

    if (truth_pgm) {
        Mask truth = detail::with_stage("truth mask", [&] { return read_mask_pgm(read_file(*truth_pgm)); });
        oc.metrics = detail::with_stage("metrics", [&] { return compare_masks(oc.stages.mask, truth); });
    }
    if (out_dir) {
        detail::write_stage_artifacts(oc, *out_dir);
        if (write_report)
            write_file(*out_dir / "report.json", detail::segment_report_json(oc).dump(2) + "\n");
    }
    return oc;
}

inline DetectionReport run_detect(const PipelineConfig& cfg, const MlpNetwork& net,
                                  const std::filesystem::path& fits_path,
                                  const std::optional<std::filesystem::path>& truth_pgm = {},
                                  const std::optional<std::filesystem::path>& out_dir = {}) {
    if (net.input_size() != 7)
        throw ModelShapeMismatch("detection model must take the 7 region features, got " +
                                 std::to_string(net.input_size()) + " inputs");
    SegmentOutcome seg = run_segment(cfg, fits_path, truth_pgm, out_dir, /*write_report=*/false);

    DetectionReport rep;
    rep.source_file = seg.source_file;
    rep.width = seg.width;
    rep.height = seg.height;
    rep.trace = seg.stages.trace;
    rep.metrics = seg.metrics;
    rep.blank_pixels = seg.blank_pixels;
    rep.has_extensions = seg.has_extensions;

    for (Region& r : connected_components(seg.stages.mask)) {
        if (r.pixel_count < cfg.min_region_pixels)
            continue;
        r.features = featurize(r, seg.stages.smoothed);
        double score = forward(net, r.features).output.front();
        rep.regions.push_back({std::move(r), score, score > cfg.bpnn.cutoff});
    }
    std::sort(rep.regions.begin(), rep.regions.end(), [](const ScoredRegion& a, const ScoredRegion& b) {
        if (a.score != b.score)
            return a.score > b.score;
        return a.region.label < b.region.label;
    });
    if (out_dir)
        write_file(*out_dir / "report.json", to_json(rep).dump(2) + "\n");
    return rep;
}

// ---- labeled data ingestion -------------------------------------------------

// "f1,...,f7,label" rows; a non-numeric first line is treated as a header.
inline std::vector<Sample> load_feature_csv(std::string_view text) {
    std::vector<Sample> samples;
    std::size_t pos = 0;
    bool first_line = true;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos)
            eol = text.size();
        std::string line(text.substr(pos, eol - pos));
        pos = eol + 1;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        std::vector<double> fields;
        std::size_t start = 0;
        bool numeric = true;
        while (start <= line.size()) {
            std::size_t comma = line.find(',', start);
            std::string tok = line.substr(start, comma == std::string::npos ? std::string::npos
                                                                            : comma - start);
            char* end = nullptr;
            double v = std::strtod(tok.c_str(), &end);
            while (end && (*end == ' ' || *end == '\t'))
                ++end;
            if (!end || *end != '\0' || end == tok.c_str()) {
                numeric = false;
                break;
            }
            fields.push_back(v);
            if (comma == std::string::npos)
                break;
            start = comma + 1;
        }
        if (!numeric) {
            if (first_line) {
                first_line = false;
                continue; // header
            }
            throw FormatError("feature CSV has a non-numeric row: " + line);
        }
        first_line = false;
        if (fields.size() != 8)
            throw FormatError("feature CSV rows need 7 features plus a label, got " +
                              std::to_string(fields.size()) + " fields");
        Sample s;
        s.features.assign(fields.begin(), fields.begin() + 7);
        s.target = {fields[7] > 0.5 ? 1.0 : 0.0};
        samples.push_back(std::move(s));
    }
    return samples;
}

// Majority-overlap labeling of segmented regions against a ground-truth mask.
inline std::vector<Sample> label_regions(const PipelineConfig& cfg, const Image& input,
                                         const Mask& truth) {
    if (truth.width != input.width || truth.height != input.height)
        throw DimensionMismatch("truth mask dimensions do not match the image");
    PipelineStages st = segment_image(cfg, input);
    std::vector<Sample> out;
    for (const Region& r : connected_components(st.mask)) {
        if (r.pixel_count < cfg.min_region_pixels)
            continue;
        std::size_t overlap = 0;
        for (const auto& [x, y] : r.pixels)
            overlap += truth.at(x, y);
        auto f = featurize(r, st.smoothed);
        Sample s;
        s.features.assign(f.begin(), f.end());
        s.target = {2 * overlap >= r.pixel_count ? 1.0 : 0.0};
        out.push_back(std::move(s));
    }
    return out;
}

// Manifest lines are "<fits path> <truth pgm path>", relative to the manifest.
inline std::vector<Sample> load_manifest_pairs(const PipelineConfig& cfg,
                                               const std::filesystem::path& manifest) {
    std::vector<std::uint8_t> raw = read_file(manifest);
    std::string text(raw.begin(), raw.end());
    std::filesystem::path base = manifest.parent_path();
    std::vector<Sample> samples;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos)
            eol = text.size();
        std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line[0] == '#')
            continue;
        std::size_t space = line.find_first_of(" \t");
        if (space == std::string::npos)
            throw FormatError("manifest line needs '<fits> <truth.pgm>': " + line);
        std::filesystem::path fits_path = base / line.substr(0, space);
        std::filesystem::path truth_path = base / line.substr(line.find_first_not_of(" \t", space));
        FitsImage parsed = parse_fits(read_file(fits_path));
        Mask truth = read_mask_pgm(read_file(truth_path));
        std::vector<Sample> labeled = label_regions(cfg, parsed.image, truth);
        samples.insert(samples.end(), std::make_move_iterator(labeled.begin()),
                       std::make_move_iterator(labeled.end()));
    }
    return samples;
}

// Labeled feature vectors from freshly synthesized star fields: regions that
// majority-overlap a planted blob are positive, everything else (hot-pixel
// artifacts, stray noise) is negative.
inline PipelineConfig dataset_pipeline_config() {
    PipelineConfig cfg;
    cfg.erosion.iterations = 0; // keep the artifact class alive in the mask
    cfg.sigma = 0.4;
    cfg.min_region_pixels = 1;
    return cfg;
}

inline std::vector<Sample> make_region_dataset(std::uint64_t seed, std::size_t min_regions) {
    PipelineConfig cfg = dataset_pipeline_config();
    std::vector<Sample> out;
    for (std::uint64_t i = 0; out.size() < min_regions && i < 4096; ++i) {
        SynthConfig sc;
        sc.width = 192;
        sc.height = 192;
        sc.blobs = 7;
        sc.artifacts = 7;
        sc.noise_sigma = 0.008;
        sc.seed = seed + 0x9E3779B97F4A7C15ull * (i + 1);
        SynthField field = make_star_field(sc);
        std::vector<Sample> labeled = label_regions(cfg, field.image, field.blob_truth);
        out.insert(out.end(), std::make_move_iterator(labeled.begin()),
                   std::make_move_iterator(labeled.end()));
    }
    return out;
}

// ---- training ----------------------------------------------------------------

struct TrainOutcome {
    TrainResult result;
    std::array<EvalReport, 3> reports; // training, validation, test
    std::string model_json;
    std::string history_csv;
    std::string grid_text;
};

namespace detail {

inline std::string format_grid(const std::array<EvalReport, 3>& reports) {
    char buf[160];
    std::string out = "Statistics      Training Set  Validation Set  Test Data\n";
    std::snprintf(buf, sizeof(buf), "Accuracy        %11.2f%%  %13.2f%%  %8.2f%%\n",
                  100.0 * reports[0].accuracy, 100.0 * reports[1].accuracy,
                  100.0 * reports[2].accuracy);
    out += buf;
    std::snprintf(buf, sizeof(buf), "MSE             %12.4f  %14.4f  %9.4f\n", reports[0].mse,
                  reports[1].mse, reports[2].mse);
    out += buf;
    std::snprintf(buf, sizeof(buf), "Error           %11.2f%%  %13.2f%%  %8.2f%%\n",
                  100.0 * reports[0].error_rate, 100.0 * reports[1].error_rate,
                  100.0 * reports[2].error_rate);
    out += buf;
    return out;
}

} // namespace detail

inline TrainOutcome run_train(const PipelineConfig& cfg, const std::vector<Sample>& samples,
                              const std::optional<std::filesystem::path>& out_dir = {}) {
    validate(cfg);
    if (samples.size() < 10)
        throw EmptyDataset("training needs at least 10 labeled samples, got " +
                           std::to_string(samples.size()));

    MlpNetwork net0 = init_network(cfg.bpnn.layer_sizes, cfg.bpnn.train.seed);
    TrainOutcome oc;
    oc.result = train(net0, samples, cfg.bpnn.train);

    auto subset = [&](const std::vector<std::size_t>& idx) {
        std::vector<Sample> sub;
        sub.reserve(idx.size());
        for (std::size_t i : idx)
            sub.push_back(samples[i]);
        return sub;
    };
    const char* names[3] = {"training", "validation", "test"};
    const std::vector<std::size_t>* splits[3] = {&oc.result.train_indices, &oc.result.val_indices,
                                                 &oc.result.test_indices};
    for (int i = 0; i < 3; ++i) {
        if (splits[i]->empty())
            throw InvalidArgument(std::string("split leaves the ") + names[i] + " set empty");
        oc.reports[static_cast<std::size_t>(i)] =
            evaluate(oc.result.net, subset(*splits[i]), cfg.bpnn.cutoff, names[i]);
    }

    oc.model_json = save_model(oc.result.net);
    oc.history_csv = history_to_csv(oc.result.history);
    oc.grid_text = detail::format_grid(oc.reports);

    if (out_dir) {
        std::filesystem::create_directories(*out_dir);
        write_file(*out_dir / "model.json", oc.model_json);
        write_file(*out_dir / "history.csv", oc.history_csv);
        nlohmann::json j;
        j["best_epoch"] = oc.result.best_epoch;
        j["epochs_run"] = oc.result.history.size();
        for (const EvalReport& r : oc.reports)
            j["sets"][r.set_name] = {{"accuracy", r.accuracy}, {"mse", r.mse}, {"error_rate", r.error_rate}};
        write_file(*out_dir / "train_report.json", j.dump(2) + "\n");
    }
    return oc;
}

} // namespace astroseg
