// vesseltrack: phantom generation, model training, vessel tracking, surface
// reconstruction and evaluation. All subcommands are config-driven (JSON) and
// deterministic given --seed; every run writes a manifest echoing the
// resolved configuration next to its outputs.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <omp.h>

#include "vt/controller.hpp"
#include "vt/icosphere.hpp"
#include "vt/pipeline.hpp"
#include "vt/polar.hpp"
#include "vt/sphere_backbone.hpp"
#include "vt/surface.hpp"
#include "vt/tracker.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace vt;

namespace {

json read_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file: " + path);
    json j;
    f >> j;
    return j;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << text;
    if (text.empty() || text.back() != '\n') f << "\n";
    if (!f) throw std::runtime_error("write failed: " + path.string());
}

void write_manifest(const fs::path& out, const std::string& cmd, uint64_t seed,
                    const json& resolved) {
    json m{{"command", cmd}, {"seed", seed}, {"config", resolved}};
    write_text(out / (cmd + "_manifest.json"), m.dump(2));
}

ScaleSet scales_from(const json& cfg) {
    if (!cfg.contains("scales")) return default_scale_set();
    ScaleSet s;
    for (const auto& r : cfg.at("scales")) s.radii.push_back(r.get<double>());
    s.validate();
    return s;
}

std::string loss_csv(const std::vector<double>& losses) {
    std::ostringstream os;
    os << "step,loss\n";
    for (size_t i = 0; i < losses.size(); ++i) os << i << "," << losses[i] << "\n";
    return os.str();
}

// ---- subcommands -----------------------------------------------------------

void cmd_phantom(const json& cfg, uint64_t seed, const fs::path& out) {
    std::string preset = cfg.value("preset", "default");
    if (preset != "default")
        throw std::runtime_error("unknown phantom preset: " + preset);
    PhantomSystem sys = make_default_phantom(seed);
    save_volume(sys.volume, (out / "volume.json").string());
    save_volume(sys.masks, (out / "masks.json").string());
    for (const auto& t : sys.truths)
        save_truth(t, (out / ("truth_" + t.name + ".json")).string());
    write_text(out / "controller.json", sys.controller_config);
    write_manifest(out, "phantom", seed, json{{"preset", preset}});
}

void cmd_train(const json& cfg, uint64_t seed, const fs::path& out) {
    std::string model = cfg.at("model").get<std::string>();
    json dj = cfg.value("dataset", json::object());
    json tj = cfg.value("train", json::object());

    if (model == "orient") {
        OrientDatasetConfig dc;
        dc.n_tubes = dj.value("n_tubes", dc.n_tubes);
        dc.r_lo = dj.value("r_lo", dc.r_lo);
        dc.r_hi = dj.value("r_hi", dc.r_hi);
        dc.samples_per_tube = dj.value("samples_per_tube", dc.samples_per_tube);
        dc.noise_sigma = dj.value("noise_sigma", dc.noise_sigma);
        dc.seed = seed;
        OrientTrainConfig tc;
        tc.lr = tj.value("lr", tc.lr);
        tc.batch = tj.value("batch", tc.batch);
        tc.steps = tj.value("steps", tc.steps);
        tc.seed = seed;
        int level = cfg.value("icosphere_level", 3);
        int n_samples = cfg.value("n_samples", 32);

        OrientDataset ds = make_orient_dataset(dc);
        Icosphere sphere = build_icosphere(level);
        GcnNet net(n_samples, Rng(seed).fork("orient_init").next_u64());
        auto losses = train_orientation(net, ds.samples, scales_from(cfg), sphere, tc);
        net.save((out / "orient.ckpt").string());
        write_text(out / "orient_loss.csv", loss_csv(losses));
        write_manifest(out, "train", seed,
                       json{{"model", model}, {"dataset", dj}, {"train", tj},
                            {"icosphere_level", level}, {"final_loss", losses.back()}});
    } else if (model == "contour") {
        ContourDatasetConfig dc;
        dc.n_tubes = dj.value("n_tubes", dc.n_tubes);
        dc.r_lo = dj.value("r_lo", dc.r_lo);
        dc.r_hi = dj.value("r_hi", dc.r_hi);
        dc.samples_per_tube = dj.value("samples_per_tube", dc.samples_per_tube);
        dc.noise_sigma = dj.value("noise_sigma", dc.noise_sigma);
        dc.ellipse_frac = dj.value("ellipse_frac", dc.ellipse_frac);
        dc.seed = seed;
        ContourTrainConfig tc;
        tc.lr = tj.value("lr", tc.lr);
        tc.batch = tj.value("batch", tc.batch);
        tc.steps = tj.value("steps", tc.steps);
        tc.seed = seed;

        auto ds = make_contour_dataset(dc);
        ContourNet net(Rng(seed).fork("contour_init").next_u64());
        auto losses = train_contour(net, ds, tc);
        net.save((out / "contour.ckpt").string());
        write_text(out / "contour_loss.csv", loss_csv(losses));
        write_manifest(out, "train", seed,
                       json{{"model", model}, {"dataset", dj}, {"train", tj},
                            {"final_loss", losses.back()}});
    } else {
        throw std::runtime_error("unknown model '" + model + "' (expected orient|contour)");
    }
}

void cmd_track(const json& cfg, uint64_t seed, const fs::path& out) {
    ScalarVolume vol = load_scalar_volume(cfg.at("volume").get<std::string>());
    LabelVolume masks = load_label_volume(cfg.at("masks").get<std::string>());
    std::string ctrl;
    if (cfg.contains("controller")) {
        ctrl = cfg.at("controller").dump();
    } else {
        std::ifstream f(cfg.at("controller_path").get<std::string>());
        if (!f) throw std::runtime_error("cannot open controller config");
        std::stringstream ss;
        ss << f.rdbuf();
        ctrl = ss.str();
    }
    auto plans = build_boundary_conditions(ctrl, masks, vol);

    GcnNet backbone = GcnNet::load(cfg.at("orient_checkpoint").get<std::string>());
    ContourNet contour = ContourNet::load(cfg.at("contour_checkpoint").get<std::string>());
    Icosphere sphere = build_icosphere(cfg.value("icosphere_level", 3));
    ScaleSet R = scales_from(cfg);

    json tcfg = cfg.value("tracker", json::object());
    json written = json::array();
    for (auto& [name, plan] : plans) {
        TrackConfig tc;
        tc.delta = plan.delta;
        tc.eta = plan.eta;
        tc.max_steps = tcfg.value("max_steps", tc.max_steps);
        tc.angle_gate = tcfg.value("angle_gate", tc.angle_gate);
        tc.recenter = tcfg.value("recenter", tc.recenter);
        tc.n_r = cfg.value("n_r", tc.n_r);
        tc.n_phi = cfg.value("n_phi", tc.n_phi);
        TrackedVessel v =
            track_vessel(vol, backbone, contour, sphere, R, plan.seed.point, plan.omega, tc, name);
        fs::path p = out / ("track_" + name + ".json");
        write_text(p, tracked_vessel_to_json(v));
        written.push_back(p.string());
    }
    write_text(out / "resolved_plan.json", resolved_plan_to_json(plans));
    write_manifest(out, "track", seed, json{{"config", cfg}, {"tracks", written}});
}

void cmd_reconstruct(const json& cfg, uint64_t seed, const fs::path& out) {
    std::vector<TrackedVessel> tracks;
    for (const auto& p : cfg.at("tracks")) {
        std::ifstream f(p.get<std::string>());
        if (!f) throw std::runtime_error("cannot open track file: " + p.get<std::string>());
        std::stringstream ss;
        ss << f.rdbuf();
        tracks.push_back(tracked_vessel_from_json(ss.str()));
    }
    if (tracks.empty()) throw std::runtime_error("reconstruct needs at least one track");

    json fj = cfg.value("field", json::object());
    FieldTrainConfig fc;
    fc.steps = fj.value("steps", fc.steps);
    fc.batch = fj.value("batch", fc.batch);
    fc.lr = fj.value("lr", fc.lr);
    fc.oracle_samples = fj.value("oracle_samples", fc.oracle_samples);
    fc.holdout_stride = fj.value("holdout_stride", fc.holdout_stride);

    std::vector<NeuralField> fields;
    json reports = json::array();
    for (size_t i = 0; i < tracks.size(); ++i) {
        FieldTrainConfig fci = fc;
        fci.seed = Rng(seed).fork("field").fork((uint64_t)i).next_u64();
        FieldFitReport rep;
        fields.push_back(fit_neural_field(tracks[i], fci, &rep));
        fields.back().save((out / ("field_" + tracks[i].name + ".ckpt")).string());
        reports.push_back({{"vessel", tracks[i].name},
                           {"data_loss", rep.data_loss},
                           {"eikonal_loss", rep.eikonal_loss},
                           {"holdout_mean_abs_mm", rep.holdout_mean_abs_mm},
                           {"loft_folded", rep.loft_folded}});
    }

    std::vector<SdfFn> fns;
    for (const auto& f : fields) fns.push_back(clamp_to_domain(f));
    SdfFn sdf = blend_sdfs(std::move(fns), cfg.value("smin_k", 2.0));

    double margin = cfg.value("mc_margin_mm", 10.0);
    Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
    for (const auto& t : tracks)
        for (const auto& tc : t.contours)
            for (const auto& p : tc.contour.points()) {
                lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
                hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
            }
    Vec3 m3{margin, margin, margin};
    Mesh mesh = marching_cubes(sdf, lo - m3, hi + m3, cfg.value("mc_resolution_mm", 2.0));
    save_obj((out / "blended.obj").string(), mesh);
    write_text(out / "watertight.json", watertight_report_to_json(mesh_watertight(mesh)));
    write_manifest(out, "reconstruct", seed, json{{"config", cfg}, {"fields", reports}});
}

void cmd_evaluate(const json& cfg, uint64_t seed, const fs::path& out) {
    std::vector<PhantomTruth> truths;
    for (const auto& p : cfg.at("truths")) truths.push_back(load_truth(p.get<std::string>()));

    json metrics;
    std::ostringstream csv;
    csv << "metric,vessel,value\n";
    if (cfg.contains("tracks")) {
        json per_track = json::array();
        for (const auto& p : cfg.at("tracks")) {
            std::ifstream f(p.get<std::string>());
            if (!f) throw std::runtime_error("cannot open track file: " + p.get<std::string>());
            std::stringstream ss;
            ss << f.rdbuf();
            TrackedVessel v = tracked_vessel_from_json(ss.str());
            double cerr = centerline_mean_error(v, truths);
            auto dsc = track_contour_dsc(v, truths);
            double mean_dsc = 0, min_dsc = dsc.empty() ? 0 : 1;
            for (double d : dsc) {
                mean_dsc += d;
                min_dsc = std::min(min_dsc, d);
            }
            if (!dsc.empty()) mean_dsc /= (double)dsc.size();
            per_track.push_back({{"vessel", v.name},
                                 {"centerline_mean_error_mm", cerr},
                                 {"contour_dsc_mean", mean_dsc},
                                 {"contour_dsc_min", min_dsc},
                                 {"contour_dsc", dsc},
                                 {"points", v.centerline.size()}});
            csv << "centerline_mean_error_mm," << v.name << "," << cerr << "\n";
            csv << "contour_dsc_mean," << v.name << "," << mean_dsc << "\n";
        }
        metrics["tracks"] = per_track;
    }
    if (cfg.contains("mesh")) {
        Mesh mesh = load_obj(cfg.at("mesh").get<std::string>());
        auto wt = mesh_watertight(mesh);
        auto se = mesh_surface_error(mesh, truths);
        metrics["mesh"] = {{"watertight", json::parse(watertight_report_to_json(wt))},
                           {"surface_error_mean_mm", se.mean},
                           {"surface_error_max_mm", se.max}};
        csv << "surface_error_mean_mm,mesh," << se.mean << "\n";
        csv << "surface_error_max_mm,mesh," << se.max << "\n";
        csv << "is_watertight,mesh," << (wt.is_watertight ? 1 : 0) << "\n";
    }
    write_text(out / "metrics.json", metrics.dump(2));
    write_text(out / "metrics.csv", csv.str());
    write_manifest(out, "evaluate", seed, cfg);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"vessel tracking and surface reconstruction pipeline"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".";
    uint64_t seed = 0;
    int threads = 0;
    bool seed_set = false;
    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--seed", seed, "root RNG seed (required)")->each([&](const std::string&) {
        seed_set = true;
    });
    app.add_option("--threads", threads, "OpenMP thread cap (0 = library default)");
    app.add_option("--out", out_dir, "output directory");

    auto* sc_phantom = app.add_subcommand("phantom", "generate a phantom volume + masks + truth");
    auto* sc_train = app.add_subcommand("train", "train the orientation or contour model");
    auto* sc_track = app.add_subcommand("track", "run the controller and track all vessels");
    auto* sc_reconstruct =
        app.add_subcommand("reconstruct", "fit neural fields and extract the blended surface");
    auto* sc_evaluate = app.add_subcommand("evaluate", "score tracks/meshes against truth");

    CLI11_PARSE(app, argc, argv);

    try {
        if (!seed_set) throw std::runtime_error("--seed is required");
        if (threads > 0) omp_set_num_threads(threads);
        fs::path out(out_dir);
        fs::create_directories(out);
        json cfg = read_config(config_path);

        if (sc_phantom->parsed()) cmd_phantom(cfg, seed, out);
        else if (sc_train->parsed()) cmd_train(cfg, seed, out);
        else if (sc_track->parsed()) cmd_track(cfg, seed, out);
        else if (sc_reconstruct->parsed()) cmd_reconstruct(cfg, seed, out);
        else if (sc_evaluate->parsed()) cmd_evaluate(cfg, seed, out);
        return 0;
    } catch (const std::exception& e) {
        json err{{"error", e.what()}};
        std::cerr << err.dump() << std::endl;
        return 1;
    }
}
