#include "rvlm/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "rvlm/dataset.hpp"
#include "rvlm/errors.hpp"
#include "rvlm/evaluation.hpp"
#include "rvlm/image.hpp"
#include "rvlm/inference.hpp"
#include "rvlm/json_io.hpp"
#include "rvlm/pseudo_label.hpp"
#include "rvlm/training_artifacts.hpp"
#include "rvlm/wire_backend.hpp"
#include "rvlm/zoom_data.hpp"

namespace rvlm {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct UsageError : Error {
    using Error::Error;
};

struct GlobalOptions {
    std::uint64_t seed = 0;
    std::string log_level = "info";
    std::string output_dir;
    int jobs = 1;
};

BBox parse_box_arg(const std::vector<double>& v, const char* flag) {
    if (v.size() != 4) throw UsageError(std::string(flag) + " expects x1,y1,x2,y2");
    try {
        return make_box(v[0], v[1], v[2], v[3]);
    } catch (const GeometryError& e) {
        throw UsageError(std::string(flag) + ": " + e.what());
    }
}

ImageDims parse_dims_arg(const std::string& s) {
    int w = 0;
    int h = 0;
    char x = 0;
    std::istringstream in(s);
    if (!(in >> w >> x >> h) || (x != 'x' && x != 'X') || w < 1 || h < 1) {
        throw UsageError("--dims expects WIDTHxHEIGHT, got '" + s + "'");
    }
    return ImageDims{w, h};
}

HistoryAction parse_history_arg(const std::string& s) {
    const auto at = s.find('@');
    const auto comma = s.find(',', at == std::string::npos ? 0 : at);
    if (at == std::string::npos || comma == std::string::npos) {
        throw UsageError("--history expects action@x,y, got '" + s + "'");
    }
    try {
        return HistoryAction{s.substr(0, at),
                             PointCoord{std::stod(s.substr(at + 1, comma - at - 1)),
                                        std::stod(s.substr(comma + 1)), std::nullopt}};
    } catch (const std::exception&) {
        throw UsageError("--history expects action@x,y, got '" + s + "'");
    }
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw IoError(path.string(), "cannot open for writing");
    return out;
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError(path.string() + ": cannot read backend config");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw UsageError(path.string() + ": " + e.what());
    }
}

/// Writes the fully-resolved configuration next to the run's outputs.
void log_resolved_config(const CLI::App& app, const fs::path& dir) {
    if (dir.empty()) return;
    fs::create_directories(dir);
    auto out = open_out(dir / "resolved_config.ini");
    out << app.config_to_str(true, false);
    spdlog::debug("resolved config written to {}", (dir / "resolved_config.ini").string());
}

fs::path output_dir_for(const GlobalOptions& g, const std::string& out_file) {
    if (!g.output_dir.empty()) return g.output_dir;
    if (out_file.empty()) return {};
    const fs::path p(out_file);
    return p.has_parent_path() ? p.parent_path() : fs::path(".");
}

// ------------------------------------------------------------------ backends

struct BackendSpec {
    std::string type = "sim";
    SimOracleConfig sim;
    std::optional<WireConfig> wire;
    bool has_hidden_gt = false;
};

BackendSpec load_backend_spec(const std::string& path, std::uint64_t seed) {
    BackendSpec spec;
    json j = json::object();
    if (!path.empty()) {
        j = read_json_file(path);
    } else if (const char* url = std::getenv("R_VLM_BACKEND_URL"); url && *url) {
        j = json{{"type", "wire"}};
    } else {
        throw UsageError("no backend: pass --backend-config or set R_VLM_BACKEND_URL");
    }
    spec.type = j.value("type", std::string("sim"));
    try {
        if (spec.type == "sim") {
            spec.sim.noise_scale = j.value("noise_scale", 0.0);
            spec.sim.parse_failure_rate = j.value("parse_failure_rate", 0.0);
            spec.sim.rng_seed = j.value("seed", seed);
            spec.sim.decimals = j.value("decimals", 2);
            if (j.contains("hidden_gt")) {
                spec.sim.hidden_gt = j["hidden_gt"].get<BBox>();
                spec.has_hidden_gt = true;
            }
        } else if (spec.type == "wire") {
            spec.wire = wire_config_from_json(j);
        } else {
            throw UsageError("backend type must be 'sim' or 'wire', got '" + spec.type + "'");
        }
    } catch (const SchemaError& e) {
        throw UsageError(path + ": " + e.what());
    } catch (const json::exception& e) {
        throw UsageError(path + ": " + e.what());
    }
    return spec;
}

BackendFactory make_factory(const BackendSpec& spec) {
    if (spec.wire) {
        auto shared = std::make_shared<WireConfig>(*spec.wire);
        return [shared](std::size_t, const GroundingSample&) -> std::unique_ptr<Backend> {
            return std::make_unique<WireBackend>(*shared);
        };
    }
    const SimOracleConfig base = spec.sim;
    return [base](std::size_t index, const GroundingSample& s) -> std::unique_ptr<Backend> {
        SimOracleConfig c = base;
        c.hidden_gt = s.gt;
        c.rng_seed = splitmix64(base.rng_seed ^ splitmix64(index));
        return std::make_unique<SimOracleBackend>(c);
    };
}

// --------------------------------------------------------------- subcommands

struct GenPseudoOpts {
    std::vector<double> gt;
    std::string in;
    std::string out;
    std::size_t n = 4;
    std::size_t candidates = 100;
    double threshold = 0.3;
    std::string mode = "box";
};

int cmd_gen_pseudo(const CLI::App& app, const GlobalOptions& g, const GenPseudoOpts& o) {
    if (o.gt.empty() == o.in.empty()) throw UsageError("gen-pseudo needs exactly one of --gt or --in");
    const Mode mode = parse_mode(o.mode);

    std::vector<json> gts;
    if (!o.gt.empty()) {
        if (mode == Mode::box) {
            gts.push_back(parse_box_arg(o.gt, "--gt"));
        } else {
            if (o.gt.size() != 2) throw UsageError("--gt expects x,y in point mode");
            gts.push_back(json::array({o.gt[0], o.gt[1]}));
        }
    } else {
        for (const auto& s : read_dataset(o.in)) {
            gts.push_back(mode == Mode::box ? json(s.gt) : json(center(s.gt)));
        }
    }

    std::ostringstream buf;
    std::size_t failures = 0;
    for (std::size_t i = 0; i < gts.size(); ++i) {
        GenConfig cfg{o.n, o.candidates, o.threshold, g.seed + i};
        try {
            if (mode == Mode::box) {
                buf << pseudo_set_to_json(generate_pseudo_boxes(gts[i].get<BBox>(), cfg)).dump() << '\n';
            } else {
                const auto set = generate_pseudo_points(gts[i].get<PointCoord>(), cfg);
                json points = json::array();
                json dists = json::array();
                json weights = json::array();
                for (const auto& p : set.points) {
                    points.push_back(p.point);
                    dists.push_back(p.distance);
                    weights.push_back(p.weight);
                }
                buf << json{{"gt", set.gt}, {"points", points}, {"distances", dists},
                            {"weights", weights}, {"seed", set.seed}}
                           .dump()
                    << '\n';
            }
        } catch (const ShortfallError& e) {
            ++failures;
            spdlog::error("record {}: {}", i, e.what());
        }
    }
    if (o.out.empty()) {
        std::cout << buf.str();
    } else {
        open_out(o.out) << buf.str();
    }
    log_resolved_config(app, output_dir_for(g, o.out));
    return failures == 0 ? 0 : 1;
}

struct GenZoomOpts {
    std::string in;
    std::string out;
    std::vector<double> ks{5.0, 7.0};
    double sigma = -0.2;
    std::size_t samples_per_gt = 1;
    std::size_t max_attempts = 10000;
    std::string image_dir;
    bool no_images = false;
};

int cmd_gen_zoom(const CLI::App& app, const GlobalOptions& g, const GenZoomOpts& o) {
    PipelineConfig cfg;
    cfg.ks = o.ks;
    cfg.sigma = o.sigma;
    cfg.seed = g.seed;
    cfg.samples_per_gt = o.samples_per_gt;
    cfg.max_attempts = o.max_attempts;
    cfg.jobs = g.jobs;
    if (!o.no_images) {
        cfg.image_dir = o.image_dir.empty() ? fs::path(o.out + ".images") : fs::path(o.image_dir);
    }
    if (fs::path(o.out).has_parent_path()) fs::create_directories(fs::path(o.out).parent_path());
    const auto stats = run_pipeline_files(o.in, o.out, cfg);
    for (const auto& line : stats.log) spdlog::warn("{}", line);
    spdlog::info("gen-zoom-data: requested {}, emitted {}, dropped {}", stats.requested, stats.emitted,
                 stats.dropped);
    log_resolved_config(app, output_dir_for(g, o.out));
    return 0;
}

struct EmitOpts {
    std::string in;
    std::string out_dir;
    std::string prefix = "click";
    std::string tokenizer = "byte-v1";
    std::size_t prefix_offset = 0;
    bool dense_mask = false;
};

int cmd_emit(const CLI::App& app, const GlobalOptions& g, const EmitOpts& o) {
    const auto tok = make_tokenizer(o.tokenizer);
    const auto rows = read_jsonl(o.in);
    fs::create_directories(o.out_dir);
    json manifest = json::array();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        PseudoLabelSet set;
        try {
            set = pseudo_set_from_json(rows[i]);
        } catch (const Error& e) {
            throw SchemaError(o.in + ": record " + std::to_string(i) + ": " + e.what());
        }
        const std::string prefix = rows[i].value("prefix", o.prefix);
        const auto artifact = build_artifact(prefix, set, *tok, o.prefix_offset, o.dense_mask);
        validate(artifact);
        char name[48];
        std::snprintf(name, sizeof name, "artifact_%06zu.json", i);
        emit_artifact(artifact, fs::path(o.out_dir) / name);

        const std::size_t span_len = artifact.layout.box_spans.front().size();
        const auto cost = token_cost(artifact.layout.prefix_len, span_len, set.size());
        manifest.push_back({{"file", name},
                            {"tokens", artifact.token_ids.size()},
                            {"prefix_len", artifact.layout.prefix_len},
                            {"span_len", span_len},
                            {"pseudo_boxes", set.size()},
                            {"independent_tokens", cost.independent},
                            {"token_ratio", cost.ratio}});
    }
    open_out(fs::path(o.out_dir) / "manifest.json") << manifest.dump(2) << '\n';
    spdlog::info("emit-train-artifacts: wrote {} artifacts to {}", rows.size(), o.out_dir);
    log_resolved_config(app, g.output_dir.empty() ? fs::path(o.out_dir) : fs::path(g.output_dir));
    return 0;
}

struct GroundOpts {
    std::string image;
    std::string instruction;
    int stages = 2;
    double k = 5.0;
    std::string mode = "box";
    std::string backend_config;
    std::vector<double> gt;
    std::string dims;
    std::vector<std::string> history;
    std::string out;
};

int cmd_ground(const CLI::App& app, const GlobalOptions& g, const GroundOpts& o) {
    GroundConfig cfg;
    cfg.stages = o.stages;
    cfg.k = o.k;
    cfg.mode = parse_mode(o.mode);
    if (cfg.stages < 1) throw UsageError("--stages must be at least 1");
    if (!(cfg.k > 1.0)) throw UsageError("--k must exceed 1");

    auto spec = load_backend_spec(o.backend_config, g.seed);
    if (!o.gt.empty()) {
        spec.sim.hidden_gt = parse_box_arg(o.gt, "--gt");
        spec.has_hidden_gt = true;
    }
    std::unique_ptr<Backend> backend;
    if (spec.wire) {
        backend = std::make_unique<WireBackend>(*spec.wire);
    } else {
        if (!spec.has_hidden_gt) throw UsageError("simulated backend needs --gt or hidden_gt");
        backend = std::make_unique<SimOracleBackend>(spec.sim);
    }

    cv::Mat pixels;
    Screenshot shot;
    if (!o.image.empty() && fs::exists(o.image)) {
        pixels = load_image(o.image);
        shot.pixels = &pixels;
        shot.dims = dims_of(pixels);
    } else if (!o.dims.empty()) {
        shot.dims = parse_dims_arg(o.dims);
    } else {
        throw UsageError("--image is not readable and no --dims given");
    }

    std::vector<HistoryAction> history;
    for (const auto& h : o.history) history.push_back(parse_history_arg(h));

    const auto result = ground_navigation(*backend, shot, o.instruction, history, cfg);
    const std::string text = result_to_json(result, cfg.mode).dump(2) + "\n";
    if (o.out.empty()) {
        std::cout << text;
    } else {
        open_out(o.out) << text;
    }
    log_resolved_config(app, output_dir_for(g, o.out));
    return 0;
}

struct EvalOpts {
    std::string dataset;
    std::string backend_config;
    int stages = 2;
    double k = 5.0;
    std::string mode = "box";
    std::string rule = "center";
    double iou_tau = 0.5;
    std::string report_dir;
    std::size_t annotate = 0;
};

int cmd_evaluate(const CLI::App& app, const GlobalOptions& g, const EvalOpts& o) {
    EvalConfig cfg;
    cfg.ground.stages = o.stages;
    cfg.ground.k = o.k;
    cfg.ground.mode = parse_mode(o.mode);
    cfg.jobs = g.jobs;
    cfg.seed = g.seed;
    cfg.iou_tau = o.iou_tau;
    if (o.rule == "center") {
        cfg.rule = CorrectnessRule::center_in_gt;
    } else if (o.rule == "iou") {
        cfg.rule = CorrectnessRule::iou_threshold;
    } else {
        throw UsageError("--rule must be 'center' or 'iou'");
    }

    const auto spec = load_backend_spec(o.backend_config, g.seed);
    const auto samples = read_dataset(o.dataset);
    const auto records = evaluate_records(samples, make_factory(spec), cfg);
    auto report = summarize(records, cfg.ground.mode, eval_config_to_json(cfg));
    report.config["backend"] = spec.type;
    write_report(report, records, o.report_dir);

    std::size_t drawn = 0;
    for (const auto& r : records) {
        if (drawn >= o.annotate) break;
        const auto& s = samples[r.id];
        if (!r.final || !std::holds_alternative<BBox>(*r.final) || !fs::exists(s.image_path)) continue;
        char name[48];
        std::snprintf(name, sizeof name, "annotated_%06zu.png", r.id);
        annotate_to_file(s.image_path, std::get<BBox>(*r.final), s.gt, fs::path(o.report_dir) / name);
        ++drawn;
    }
    for (const auto& r : records) {
        if (!r.error.empty()) spdlog::warn("sample {}: {}", r.id, r.error);
    }
    spdlog::info("evaluate: {} samples, accuracy {:.4f}", report.overall.n, report.overall.accuracy());
    log_resolved_config(app, g.output_dir.empty() ? fs::path(o.report_dir) : fs::path(g.output_dir));
    return 0;
}

struct AnalyzeOpts {
    std::string report_dir;
    std::string out;
};

int cmd_analyze(const CLI::App& app, const GlobalOptions& g, const AnalyzeOpts& o) {
    const auto report = analyze(fs::path(o.report_dir) / "records.jsonl");
    const std::string text = report_to_json(report).dump(2) + "\n";
    if (o.out.empty()) {
        std::cout << text;
    } else {
        open_out(o.out) << text;
    }
    log_resolved_config(app, output_dir_for(g, o.out));
    return 0;
}

void set_log_level(const std::string& level) {
    auto logger = spdlog::stderr_color_mt("rvlm");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    const auto lvl = spdlog::level::from_str(level);
    if (lvl == spdlog::level::off && level != "off") {
        throw UsageError("unknown --log-level '" + level + "'");
    }
    spdlog::set_level(lvl);
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"R-VLM grounding toolkit: zoom-in grounding, pseudo labels, training artifacts, evaluation"};
    app.set_config("--config", "", "INI/TOML config file; [subcommand] sections, flags override");
    app.require_subcommand(1);
    app.fallthrough();
    app.set_help_all_flag("--help-all", "Help for every subcommand");

    GlobalOptions g;
    app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
    app.add_option("--log-level", g.log_level, "trace|debug|info|warn|error|off")->capture_default_str();
    app.add_option("--output-dir", g.output_dir, "Where the resolved config is logged");
    app.add_option("--jobs", g.jobs, "Parallel samples")->capture_default_str()->check(CLI::PositiveNumber);

    GenPseudoOpts gp;
    auto* c_gp = app.add_subcommand("gen-pseudo", "GIoU-thresholded pseudo boxes with loss weights (JSONL)");
    c_gp->add_option("--gt", gp.gt, "Ground truth x1,y1,x2,y2 (x,y in point mode)")->delimiter(',');
    c_gp->add_option("--in", gp.in, "Dataset JSONL instead of --gt");
    c_gp->add_option("--out", gp.out, "Output JSONL (default stdout)");
    c_gp->add_option("--n", gp.n, "Pseudo labels per ground truth")->capture_default_str();
    c_gp->add_option("--candidates", gp.candidates, "Candidates drawn per ground truth")->capture_default_str();
    c_gp->add_option("--threshold", gp.threshold, "Minimum GIoU")->capture_default_str();
    c_gp->add_option("--mode", gp.mode, "box|point")->capture_default_str();

    GenZoomOpts gz;
    auto* c_gz = app.add_subcommand("gen-zoom-data", "Zoom-in instruction data from a grounding dataset");
    c_gz->add_option("--in", gz.in, "Dataset JSONL")->required();
    c_gz->add_option("--out", gz.out, "Output JSONL")->required();
    c_gz->add_option("--k", gz.ks, "Zoom factors")->delimiter(',')->capture_default_str();
    c_gz->add_option("--sigma", gz.sigma, "Minimum GIoU of the simulated first-stage box")->capture_default_str();
    c_gz->add_option("--samples-per-gt", gz.samples_per_gt, "Zoom samples per input")->capture_default_str();
    c_gz->add_option("--max-attempts", gz.max_attempts, "Perturbation attempts")->capture_default_str();
    c_gz->add_option("--image-dir", gz.image_dir, "Zoomed image directory (default <out>.images)");
    c_gz->add_flag("--no-images", gz.no_images, "Geometry only; records must carry width/height");

    EmitOpts em;
    auto* c_em = app.add_subcommand("emit-train-artifacts", "Training artifacts from gen-pseudo JSONL");
    c_em->add_option("--in", em.in, "gen-pseudo JSONL")->required();
    c_em->add_option("--out-dir", em.out_dir, "Artifact directory")->required();
    c_em->add_option("--prefix", em.prefix, "Non-coordinate label text")->capture_default_str();
    c_em->add_option("--tokenizer", em.tokenizer, "byte-v1 or charset-v1:<alphabet>")->capture_default_str();
    c_em->add_option("--prefix-offset", em.prefix_offset, "Context tokens before the label")->capture_default_str();
    c_em->add_flag("--dense-mask", em.dense_mask, "Also store the dense attention mask");

    GroundOpts gr;
    auto* c_gr = app.add_subcommand("ground", "Multi-stage zoom-in grounding of one instruction");
    c_gr->add_option("--image", gr.image, "Screenshot");
    c_gr->add_option("--instruction", gr.instruction, "Instruction")->required();
    c_gr->add_option("--stages", gr.stages, "Grounding stages")->capture_default_str();
    c_gr->add_option("--k", gr.k, "Zoom factor")->capture_default_str();
    c_gr->add_option("--mode", gr.mode, "box|point")->capture_default_str();
    c_gr->add_option("--backend-config", gr.backend_config, "Backend JSON");
    c_gr->add_option("--gt", gr.gt, "Hidden ground truth for the simulated backend")->delimiter(',');
    c_gr->add_option("--dims", gr.dims, "WIDTHxHEIGHT when no image is available (simulated backend)");
    c_gr->add_option("--history", gr.history, "Navigation history action@x,y (repeatable)");
    c_gr->add_option("--out", gr.out, "Result JSON (default stdout)");

    EvalOpts ev;
    auto* c_ev = app.add_subcommand("evaluate", "Evaluate grounding over a dataset");
    c_ev->add_option("--dataset", ev.dataset, "Dataset JSONL")->required();
    c_ev->add_option("--backend-config", ev.backend_config, "Backend JSON");
    c_ev->add_option("--stages", ev.stages, "Grounding stages")->capture_default_str();
    c_ev->add_option("--k", ev.k, "Zoom factor")->capture_default_str();
    c_ev->add_option("--mode", ev.mode, "box|point")->capture_default_str();
    c_ev->add_option("--rule", ev.rule, "center|iou")->capture_default_str();
    c_ev->add_option("--iou-tau", ev.iou_tau, "IoU threshold for --rule iou")->capture_default_str();
    c_ev->add_option("--report-dir", ev.report_dir, "Report directory")->required();
    c_ev->add_option("--annotate", ev.annotate, "Annotated images to write")->capture_default_str();

    AnalyzeOpts an;
    auto* c_an = app.add_subcommand("analyze", "Re-derive report tables from saved records");
    c_an->add_option("--report-dir", an.report_dir, "Directory holding records.jsonl")->required();
    c_an->add_option("--out", an.out, "Output JSON (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        if (argc <= 1) std::cerr << app.help();
        app.exit(e);
        return 2;
    }

    try {
        set_log_level(g.log_level);
        if (c_gp->parsed()) return cmd_gen_pseudo(app, g, gp);
        if (c_gz->parsed()) return cmd_gen_zoom(app, g, gz);
        if (c_em->parsed()) return cmd_emit(app, g, em);
        if (c_gr->parsed()) return cmd_ground(app, g, gr);
        if (c_ev->parsed()) return cmd_evaluate(app, g, ev);
        if (c_an->parsed()) return cmd_analyze(app, g, an);
    } catch (const UsageError& e) {
        std::cerr << "error: usage: " << e.what() << '\n';
        return 2;
    } catch (const SchemaError& e) {
        std::cerr << "error: schema: " << e.what() << '\n';
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: io: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

}  // namespace rvlm
