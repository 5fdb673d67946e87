// astroseg command line: FITS ingestion, enhancement, adaptive-threshold
// segmentation and MLP-based source detection.
//
// Exit codes: 0 success, 2 usage error, 3 input-format error, 4 numeric failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "astroseg/astroseg.hpp"

namespace fs = std::filesystem;
using namespace astroseg;

namespace {

struct PipelineFlags {
    PipelineConfig cfg;
    double forced_threshold = 1.0;
    bool strict = false;
    std::string config_path;
};

// Flat key=value config support: every key mirrors a long option of the chosen
// subcommand, and the command line wins. Implemented as token injection ahead
// of the regular parse; keys already present on the command line are skipped.
std::vector<std::string> inject_config_options(std::vector<std::string> args) {
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[i + 1];
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            break;
        }
    }
    if (path.empty() || args.empty())
        return args;

    std::ifstream file(path);
    if (!file)
        throw InvalidArgument("cannot read config file " + path);

    auto given_on_cli = [&](const std::string& key) {
        std::string flag = "--" + key;
        for (const std::string& tok : args)
            if (tok == flag || tok.rfind(flag + "=", 0) == 0)
                return true;
        return false;
    };

    std::vector<std::string> injected;
    std::string line;
    while (std::getline(file, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        std::size_t first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#')
            continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw InvalidArgument("config line is not key=value: " + line);
        auto trim = [](std::string s) {
            std::size_t b = s.find_first_not_of(" \t");
            if (b == std::string::npos)
                return std::string{};
            std::size_t e = s.find_last_not_of(" \t");
            return s.substr(b, e - b + 1);
        };
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw InvalidArgument("config line is not key=value: " + line);
        if (given_on_cli(key))
            continue;
        if (key == "strict") { // the one flag-valued key
            if (value == "true" || value == "1" || value == "yes" || value == "on")
                injected.push_back("--strict");
        } else {
            injected.push_back("--" + key);
            injected.push_back(value);
        }
    }
    // right after the subcommand token; disjoint from the explicit flags
    args.insert(args.begin() + 1, injected.begin(), injected.end());
    return args;
}

void add_pipeline_options(CLI::App* sub, PipelineFlags& pf) {
    static const std::map<std::string, SegmentationConfig::Mode> modes{
        {"global", SegmentationConfig::Mode::global_iterative},
        {"local", SegmentationConfig::Mode::local_adaptive}};
    static const std::map<std::string, ErosionConfig::Shape> shapes{
        {"square", ErosionConfig::Shape::square}, {"cross", ErosionConfig::Shape::cross}};

    sub->add_option("--mode", pf.cfg.segmentation.mode, "Segmentation mode (global|local)")
        ->transform(CLI::CheckedTransformer(modes, CLI::ignore_case));
    sub->add_option("--sigma", pf.cfg.sigma, "Gaussian smoothing sigma in pixels");
    sub->add_option("--log-c", pf.cfg.log_c, "Log transform constant c in s = c*ln(r+1)");
    sub->add_option("--se-shape", pf.cfg.erosion.shape, "Structuring element shape (square|cross)")
        ->transform(CLI::CheckedTransformer(shapes, CLI::ignore_case));
    sub->add_option("--se-size", pf.cfg.erosion.size, "Structuring element size (odd)");
    sub->add_option("--erode-iters", pf.cfg.erosion.iterations, "Erosion passes (0 disables)");
    sub->add_option("--window", pf.cfg.segmentation.window, "Local-adaptive window size (odd)");
    sub->add_option("--bias", pf.cfg.segmentation.bias, "Local threshold bias, subtracted from the midrange");
    sub->add_option("--epsilon", pf.cfg.segmentation.epsilon, "Convergence tolerance of the iteration");
    sub->add_option("--max-iter", pf.cfg.segmentation.max_iter, "Iteration cap for the global threshold");
    sub->add_option("--threshold", pf.forced_threshold, "Skip the iteration and cut at this fixed threshold")
        ->check(CLI::Range(0.0, 1.0));
    sub->add_option("--min-pixels", pf.cfg.min_region_pixels, "Drop regions smaller than this many pixels");
    sub->add_flag("--strict", pf.strict, "Fail (exit 4) when the threshold iteration does not converge");
    sub->add_option("--config", pf.config_path, "Read options from a key=value file; command line wins");
}

void finish_pipeline_flags(CLI::App* sub, PipelineFlags& pf) {
    if (sub->count("--threshold"))
        pf.cfg.segmentation.forced_threshold = pf.forced_threshold;
}

std::vector<int> parse_layers(const std::string& text) {
    std::vector<int> sizes;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t comma = text.find(',', pos);
        std::string tok = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        char* end = nullptr;
        long v = std::strtol(tok.c_str(), &end, 10);
        if (!end || *end != '\0' || v < 1)
            throw InvalidArgument("--layers wants a comma list of positive sizes, e.g. 7,10,1");
        sizes.push_back(static_cast<int>(v));
        if (comma == std::string::npos)
            break;
        pos = comma + 1;
    }
    if (sizes.size() < 2)
        throw InvalidArgument("--layers needs at least an input and an output size");
    return sizes;
}

std::array<double, 3> parse_split(const std::string& text) {
    std::array<double, 3> split{};
    std::size_t pos = 0;
    for (int i = 0; i < 3; ++i) {
        std::size_t comma = text.find(',', pos);
        if ((i < 2) == (comma == std::string::npos))
            throw InvalidArgument("--split wants three fractions, e.g. 0.7,0.15,0.15");
        std::string tok = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        char* end = nullptr;
        split[static_cast<std::size_t>(i)] = std::strtod(tok.c_str(), &end);
        if (!end || *end != '\0')
            throw InvalidArgument("--split fractions must be numbers");
        pos = comma + 1;
    }
    return split;
}

void print_ingest_warnings(std::size_t blank_pixels, bool has_extensions) {
    if (blank_pixels > 0)
        std::printf("warning: %zu undefined pixels replaced by 0 before normalization\n",
                    blank_pixels);
    if (has_extensions)
        std::printf("warning: extension HDUs present; only the primary image was read\n");
}

void print_segment_summary(const SegmentOutcome& oc, const fs::path& out_dir) {
    print_ingest_warnings(oc.blank_pixels, oc.has_extensions);
    std::printf("image: %dx%d  foreground: %zu px\n", oc.width, oc.height,
                oc.stages.mask.foreground_count());
    if (oc.stages.trace)
        std::printf("threshold: %.4f after %zu iterations (%s)\n", *oc.stages.applied_threshold,
                    oc.stages.trace->steps.size(),
                    oc.stages.trace->converged ? "converged" : "not converged");
    else if (oc.stages.applied_threshold)
        std::printf("threshold: %.4f (fixed)\n", *oc.stages.applied_threshold);
    if (oc.metrics)
        std::printf("vs truth: mse %.4f  psnr %s  error %.2f%%  accuracy %.2f%%\n", oc.metrics->mse,
                    std::isinf(oc.metrics->psnr_db) ? "inf"
                                                    : (std::to_string(oc.metrics->psnr_db) + " dB").c_str(),
                    100.0 * oc.metrics->error_rate, 100.0 * oc.metrics->accuracy);
    std::printf("artifacts written to %s\n", out_dir.string().c_str());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"astroseg: segmentation and detection of astronomical sources in FITS images"};
    app.name("astroseg"); // parse() gets a bare token vector, so no argv[0] to infer from
    app.require_subcommand(1);

    // ---- segment ----
    auto* seg = app.add_subcommand("segment", "Enhance a FITS image and emit a segmentation mask");
    std::string seg_input;
    std::string seg_truth, seg_out = "astroseg_out";
    seg->add_option("fits", seg_input, "Input FITS file")->required();
    seg->add_option("--truth", seg_truth, "Ground-truth mask (PGM) for quality metrics");
    seg->add_option("--out-dir", seg_out, "Directory for stage artifacts and reports");
    PipelineFlags seg_pf;
    add_pipeline_options(seg, seg_pf);
    seg->callback([&] {
        finish_pipeline_flags(seg, seg_pf);
        std::optional<fs::path> truth;
        if (!seg_truth.empty())
            truth = seg_truth;
        SegmentOutcome oc = run_segment(seg_pf.cfg, seg_input, truth, fs::path(seg_out));
        print_segment_summary(oc, seg_out);
        if (seg_pf.strict && oc.stages.trace && !oc.stages.trace->converged)
            throw NotConverged("threshold iteration did not converge within --max-iter");
    });

    // ---- train ----
    auto* trn = app.add_subcommand("train", "Train the region classifier on labeled data");
    std::string trn_data, trn_model, trn_layers = "7,10,1", trn_split = "0.7,0.15,0.15";
    std::string trn_out = "astroseg_train";
    PipelineFlags trn_pf;
    trn->add_option("data", trn_data,
                    "Feature CSV (f1..f7,label) or a manifest of '<fits> <truth.pgm>' pairs")
        ->required();
    trn->add_option("--layers", trn_layers, "Network topology, e.g. 7,10,1");
    trn->add_option("--lr", trn_pf.cfg.bpnn.train.learning_rate, "Learning rate");
    trn->add_option("--epochs", trn_pf.cfg.bpnn.train.max_epochs, "Epoch cap");
    trn->add_option("--patience", trn_pf.cfg.bpnn.train.patience,
                    "Validation checks without improvement before halting");
    trn->add_option("--seed", trn_pf.cfg.bpnn.train.seed, "Seed for init, split and epoch order");
    trn->add_option("--split", trn_split, "Train,validation,test fractions");
    trn->add_option("--cutoff", trn_pf.cfg.bpnn.cutoff, "Classification cutoff");
    trn->add_option("--model", trn_model, "Also write the trained model to this path");
    trn->add_option("--out-dir", trn_out, "Directory for model, history and report");
    add_pipeline_options(trn, trn_pf);
    trn->callback([&] {
        finish_pipeline_flags(trn, trn_pf);
        trn_pf.cfg.bpnn.layer_sizes = parse_layers(trn_layers);
        trn_pf.cfg.bpnn.train.split = parse_split(trn_split);
        std::vector<Sample> samples;
        if (fs::path(trn_data).extension() == ".csv") {
            std::vector<std::uint8_t> raw = read_file(trn_data);
            samples = load_feature_csv(std::string(raw.begin(), raw.end()));
        } else {
            samples = load_manifest_pairs(trn_pf.cfg, trn_data);
        }
        TrainOutcome oc = run_train(trn_pf.cfg, samples, fs::path(trn_out));
        if (!trn_model.empty())
            write_file(trn_model, oc.model_json);
        std::printf("%zu samples, stopped after %zu epochs (best epoch %d)\n", samples.size(),
                    oc.result.history.size(), oc.result.best_epoch);
        std::fputs(oc.grid_text.c_str(), stdout);
        std::printf("model written to %s\n",
                    trn_model.empty() ? (trn_out + "/model.json").c_str() : trn_model.c_str());
    });

    // ---- detect ----
    auto* det = app.add_subcommand("detect", "Segment a FITS image and classify its regions");
    std::string det_input, det_model, det_truth, det_out = "astroseg_out";
    double det_cutoff = 0.5;
    PipelineFlags det_pf;
    det->add_option("fits", det_input, "Input FITS file")->required();
    det->add_option("--model", det_model, "Trained model JSON")->required();
    det->add_option("--cutoff", det_cutoff, "Classification cutoff");
    det->add_option("--truth", det_truth, "Ground-truth mask (PGM) for quality metrics");
    det->add_option("--out-dir", det_out, "Directory for artifacts and the detection report");
    add_pipeline_options(det, det_pf);
    det->callback([&] {
        finish_pipeline_flags(det, det_pf);
        det_pf.cfg.bpnn.cutoff = det_cutoff;
        std::vector<std::uint8_t> raw = read_file(det_model);
        MlpNetwork net = load_model(std::string(raw.begin(), raw.end()));
        std::optional<fs::path> truth;
        if (!det_truth.empty())
            truth = det_truth;
        DetectionReport rep = run_detect(det_pf.cfg, net, det_input, truth, fs::path(det_out));
        print_ingest_warnings(rep.blank_pixels, rep.has_extensions);
        std::size_t hits = 0;
        for (const ScoredRegion& sr : rep.regions)
            hits += sr.predicted;
        std::printf("%zu regions scored, %zu predicted positive\n", rep.regions.size(), hits);
        for (std::size_t i = 0; i < rep.regions.size() && i < 10; ++i) {
            const ScoredRegion& sr = rep.regions[i];
            std::printf("  region %d: %zu px at (%.1f, %.1f)  score %.4f  %s\n", sr.region.label,
                        sr.region.pixel_count, sr.region.centroid_x, sr.region.centroid_y, sr.score,
                        sr.predicted ? "object" : "rejected");
        }
        std::printf("report written to %s/report.json\n", det_out.c_str());
        if (det_pf.strict && rep.trace && !rep.trace->converged)
            throw NotConverged("threshold iteration did not converge within --max-iter");
    });

    // ---- synth ----
    auto* syn = app.add_subcommand("synth", "Generate a synthetic star field with ground truth");
    SynthConfig syn_cfg;
    std::string syn_out = "synthetic";
    syn->add_option("--seed", syn_cfg.seed, "Generator seed");
    syn->add_option("--blobs", syn_cfg.blobs, "Number of planted Gaussian blobs");
    syn->add_option("--artifacts", syn_cfg.artifacts, "Number of planted hot-pixel artifacts");
    syn->add_option("--width", syn_cfg.width, "Image width");
    syn->add_option("--height", syn_cfg.height, "Image height");
    syn->add_option("--noise", syn_cfg.noise_sigma, "Additive Gaussian noise sigma");
    syn->add_option("--out", syn_out, "Output stem: writes <stem>.fits and <stem>_truth.pgm");
    syn->callback([&] {
        SynthField field = make_star_field(syn_cfg);
        FitsHeader hdr = make_image_header(-32, field.image.width, field.image.height);
        write_file(syn_out + ".fits", write_fits(hdr, field.image));
        write_file(syn_out + "_truth.pgm", write_mask_pgm(field.blob_truth));
        std::printf("wrote %s.fits and %s_truth.pgm (%zu truth px)\n", syn_out.c_str(),
                    syn_out.c_str(), field.blob_area);
    });

    // ---- convert ----
    auto* cnv = app.add_subcommand("convert", "Export a FITS image as a PGM");
    std::string cnv_input, cnv_pgm;
    int cnv_maxval = 255;
    cnv->add_option("fits", cnv_input, "Input FITS file")->required();
    cnv->add_option("--pgm", cnv_pgm, "Output PGM path")->required();
    cnv->add_option("--maxval", cnv_maxval, "PGM maxval (255 or 65535)");
    cnv->callback([&] {
        FitsImage parsed = parse_fits(read_file(cnv_input));
        write_file(cnv_pgm, write_pgm(parsed.image, cnv_maxval));
        std::printf("wrote %s (%dx%d)\n", cnv_pgm.c_str(), parsed.image.width, parsed.image.height);
    });

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        args = inject_config_options(std::move(args));
        std::reverse(args.begin(), args.end()); // CLI11's vector overload wants reversed tokens
        app.parse(std::move(args));
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const InvalidArgument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    } catch (const FormatError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 1;
    }
    return 0;
}
