#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lowlight/config.hpp"
#include "lowlight/demosaic.hpp"
#include "lowlight/diffusion.hpp"
#include "lowlight/fag.hpp"
#include "lowlight/image.hpp"
#include "lowlight/metrics.hpp"
#include "lowlight/posegen.hpp"
#include "lowlight/trainer.hpp"

namespace {

using namespace lowlight;

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open for writing: " + path);
    return f;
}

// ---- metrics ---------------------------------------------------------------

bool is_pnm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open: " + path);
    char magic[2] = {0, 0};
    f.read(magic, 2);
    return magic[0] == 'P' && (magic[1] == '5' || magic[1] == '6');
}

void print_metric_row(std::ostream& os, const metrics::MetricRow& row) {
    os << fmt(row.psnr) << ',' << fmt(row.ssim) << ',' << fmt(row.fsim) << ",n/a\n";
}

std::string resolve(const std::string& base_dir, const std::string& path) {
    if (!path.empty() && path.front() == '/') return path;
    return base_dir + "/" + path;
}

int run_metrics(const std::string& a, const std::string& b, const std::string& manifest) {
    std::vector<std::pair<img::GrayImage, img::GrayImage>> pairs;
    if (!manifest.empty()) {
        const std::string dir = std::filesystem::path(manifest).parent_path().string();
        const std::string base = dir.empty() ? "." : dir;
        for (const img::ManifestEntry& e : img::read_manifest(manifest))
            pairs.emplace_back(img::read_gray(resolve(base, e.low_path)),
                               img::read_gray(resolve(base, e.high_path)));
    } else if (is_pnm(a) && is_pnm(b)) {
        pairs.emplace_back(img::read_gray(a), img::read_gray(b));
    } else {
        // two manifests: row i scores a's low column against b's high column
        const auto ea = img::read_manifest(a);
        const auto eb = img::read_manifest(b);
        if (ea.size() != eb.size())
            throw DataError("metrics: manifests differ in length (" + std::to_string(ea.size()) +
                            " vs " + std::to_string(eb.size()) + ")");
        const std::string da = std::filesystem::path(a).parent_path().string();
        const std::string db = std::filesystem::path(b).parent_path().string();
        for (std::size_t i = 0; i < ea.size(); ++i)
            pairs.emplace_back(img::read_gray(resolve(da.empty() ? "." : da, ea[i].low_path)),
                               img::read_gray(resolve(db.empty() ? "." : db, eb[i].high_path)));
    }

    std::cout << "psnr,ssim,fsim,lpips\n";
    metrics::MetricRow mean;
    for (const auto& [x, y] : pairs) {
        const metrics::MetricRow row = metrics::all_metrics(x, y);
        print_metric_row(std::cout, row);
        mean.psnr += row.psnr;
        mean.ssim += row.ssim;
        mean.fsim += row.fsim;
    }
    if (pairs.size() > 1) {
        mean.psnr /= double(pairs.size());
        mean.ssim /= double(pairs.size());
        mean.fsim /= double(pairs.size());
        std::cout << "# mean\n";
        print_metric_row(std::cout, mean);
    }
    return 0;
}

// ---- training helpers -------------------------------------------------------

trainer::TrainConfig train_config_from(const config::Config& c) {
    trainer::TrainConfig t;
    t.net.base_channels = c.get_int("net.base_channels", t.net.base_channels);
    t.net.depth = c.get_int("net.depth", t.net.depth);
    t.net.time_embed_dim = c.get_int("net.time_embed_dim", t.net.time_embed_dim);
    t.net.image_size = c.get_int("net.image_size", t.net.image_size);
    t.net.fag_enabled = c.get_bool("net.fag_enabled", t.net.fag_enabled);
    t.net.dropout = c.get_double("net.dropout", 0.1);
    t.timesteps = c.get_int("diffusion.timesteps", t.timesteps);
    t.schedule_offset = c.get_double("diffusion.offset", t.schedule_offset);
    t.fag_lambda = c.get_double("fag.lambda", t.fag_lambda);
    t.fag_cutoff = c.get_double("fag.cutoff", t.fag_cutoff);
    t.epochs = c.get_int("train.epochs", t.epochs);
    t.batch_size = c.get_int("train.batch_size", t.batch_size);
    t.peak_lr = c.get_double("train.peak_lr", t.peak_lr);
    t.warmup_steps = c.get_int("train.warmup_steps", t.warmup_steps);
    t.seed = c.get_u64("train.seed", t.seed);
    t.checkpoint_every = c.get_int("train.checkpoint_every", t.checkpoint_every);
    t.checkpoint_prefix = c.get_string("train.checkpoint_prefix", t.checkpoint_prefix);
    return t;
}

void add_meta(ParamMap& params, const trainer::TrainConfig& cfg) {
    auto put = [&](const std::string& name, double v) {
        params.emplace("meta." + name, Tensor::scalar(v));
    };
    put("base_channels", cfg.net.base_channels);
    put("depth", cfg.net.depth);
    put("time_embed_dim", cfg.net.time_embed_dim);
    put("image_size", cfg.net.image_size);
    put("fag_enabled", cfg.net.fag_enabled ? 1.0 : 0.0);
    put("timesteps", cfg.timesteps);
    put("offset", cfg.schedule_offset);
    put("lambda", cfg.fag_lambda);
    put("cutoff", cfg.fag_cutoff);
}

double meta(const ParamMap& params, const std::string& name) {
    const auto it = params.find("meta." + name);
    if (it == params.end()) throw DataError("checkpoint lacks meta." + name);
    return it->second.item();
}

// ---- workspace CSV ----------------------------------------------------------

void write_workspace_csv(std::ostream& os, const std::vector<posegen::PoseRecord>& records) {
    os << "q1,q2,q3,q4,q5,q6,r,az,el,feasible\n";
    for (const posegen::PoseRecord& rec : records) {
        for (double q : rec.q) os << fmt(q) << ',';
        os << fmt(rec.r) << ',' << fmt(rec.azimuth) << ',' << fmt(rec.elevation) << ','
           << (rec.feasible ? 1 : 0) << '\n';
    }
}

std::vector<posegen::PoseRecord> read_workspace_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open: " + path);
    std::vector<posegen::PoseRecord> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty() || std::isalpha(static_cast<unsigned char>(line[0]))) continue;
        std::istringstream ss(line);
        std::string cell;
        std::vector<double> cols;
        while (std::getline(ss, cell, ',')) cols.push_back(std::stod(cell));
        if (cols.size() != 10)
            throw DataError(path + ":" + std::to_string(lineno) + ": expected 10 columns");
        posegen::PoseRecord rec;
        for (int j = 0; j < 6; ++j) rec.q[std::size_t(j)] = cols[std::size_t(j)];
        rec.r = cols[6];
        rec.azimuth = cols[7];
        rec.elevation = cols[8];
        rec.feasible = cols[9] != 0.0;
        records.push_back(rec);
    }
    if (records.empty()) throw DataError(path + ": no pose rows");
    return records;
}

std::array<int, 3> parse_bins(const std::string& text) {
    std::istringstream ss(text);
    std::array<int, 3> bins{};
    std::string cell;
    for (int d = 0; d < 3; ++d) {
        if (!std::getline(ss, cell, ','))
            throw DataError("--bins wants r,az,el (e.g. 4,6,3), got: " + text);
        bins[std::size_t(d)] = std::stoi(cell);
    }
    return bins;
}

// ---- subcommand bodies -------------------------------------------------------

int run_synth_data(const std::string& dir, int n, std::uint64_t seed, int size, int shapes,
                   double gain, double gamma, double sigma) {
    std::filesystem::create_directories(dir);
    std::vector<img::ManifestEntry> entries;
    for (int i = 0; i < n; ++i) {
        trainer::SynthSceneSpec spec;
        spec.seed = seed + std::uint64_t(i);
        spec.size = size;
        spec.shape_count = shapes;
        spec.gamma = gamma;
        spec.sigma = sigma;
        // alternate exposure tags; the longer exposure collects more signal
        const bool longer = i % 2 == 1;
        spec.gain = longer ? std::min(1.0, 4.0 * gain) : gain;
        const img::ImagePair pair = trainer::synth_pair(spec);

        char low_name[32], high_name[32];
        std::snprintf(low_name, sizeof low_name, "low_%04d.pgm", i);
        std::snprintf(high_name, sizeof high_name, "high_%04d.pgm", i);
        img::write_gray(dir + "/" + low_name, pair.low);
        img::write_gray(dir + "/" + high_name, pair.high);
        entries.push_back({low_name, high_name, i % 4, longer ? "1248us" : "156us"});
    }
    img::write_manifest(dir + "/manifest.tsv", entries);
    std::cout << "wrote " << n << " pairs to " << dir << "\n";
    return 0;
}

int run_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_ckpt, const trainer::TrainConfig& cfg,
              double val_fraction, const std::string& curve_path) {
    std::vector<img::ImagePair> pairs;
    for (const img::ManifestEntry& e : img::read_manifest(data_dir + "/manifest.tsv"))
        pairs.push_back(
            {img::read_gray(resolve(data_dir, e.low_path)), img::read_gray(resolve(data_dir, e.high_path))});
    if (pairs.empty()) throw DataError(config_path + ": dataset is empty");

    // validation split fixed by the seed, independent of the training streams
    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng split_rng = Rng(cfg.seed).fork(3);
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[split_rng.uniform_index(i)]);
    const std::size_t n_val =
        std::min(pairs.size() - 1, std::size_t(std::max(0.0, val_fraction) * double(pairs.size())));
    std::vector<img::ImagePair> train_set, val_set;
    for (std::size_t i = 0; i < order.size(); ++i)
        (i < n_val ? val_set : train_set).push_back(pairs[order[i]]);

    trainer::TrainResult result = trainer::train(cfg, train_set, val_set);
    for (const trainer::EpochStat& e : result.curve)
        std::cout << "epoch " << e.epoch << " lr " << fmt(e.lr) << " train " << fmt(e.train_loss)
                  << " val " << fmt(e.val_loss) << "\n";

    add_meta(result.params, cfg);
    save_checkpoint(out_ckpt, result.params);
    trainer::write_curve_csv(curve_path.empty() ? out_ckpt + ".curve.csv" : curve_path,
                             result.curve);
    return 0;
}

int run_enhance(const std::string& ckpt, const std::string& low_path,
                const std::string& out_path, std::uint64_t seed) {
    const ParamMap params = load_checkpoint(ckpt);
    trainer::TrainConfig cfg;
    cfg.net.base_channels = int(meta(params, "base_channels"));
    cfg.net.depth = int(meta(params, "depth"));
    cfg.net.time_embed_dim = int(meta(params, "time_embed_dim"));
    cfg.net.image_size = int(meta(params, "image_size"));
    cfg.net.fag_enabled = meta(params, "fag_enabled") != 0.0;
    cfg.timesteps = int(meta(params, "timesteps"));
    cfg.schedule_offset = meta(params, "offset");
    cfg.fag_lambda = meta(params, "lambda");
    cfg.fag_cutoff = meta(params, "cutoff");

    const img::GrayImage low = img::read_gray(low_path);
    const diffusion::NoiseSchedule sched =
        diffusion::cosine_schedule(cfg.timesteps, cfg.schedule_offset);
    const Tensor guidance = trainer::guidance_for(low, cfg);
    const diffusion::NetFn net = trainer::make_net(params, cfg.net, guidance);
    Rng rng(seed);
    img::GrayImage out = diffusion::sample(low, sched, net, rng);
    out.maxval = low.maxval;
    img::write_gray(out_path, out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"low-light image enhancement and capture-pose planning toolkit"};
    app.require_subcommand(1);

    // demosaic
    auto* c_dem = app.add_subcommand("demosaic", "interpolate a Bayer mosaic to RGB");
    std::string dem_in, dem_out;
    int dem_row = 0, dem_col = 0;
    c_dem->add_option("input", dem_in, "Bayer mosaic as PGM")->required();
    c_dem->add_option("output", dem_out, "RGB output as PPM")->required();
    c_dem->add_option("--row-offset", dem_row, "CFA row phase (0 or 1)");
    c_dem->add_option("--col-offset", dem_col, "CFA column phase (0 or 1)");
    c_dem->callback([&] {
        img::BayerImage b = img::read_bayer(dem_in);
        b.row_offset = dem_row;
        b.col_offset = dem_col;
        img::write_rgb(dem_out, img::demosaic_bilinear(b));
    });

    // fag
    auto* c_fag = app.add_subcommand("fag", "compute the fused-attention guidance map");
    std::string fag_in, fag_out;
    double fag_lambda = 0.5773502691896258, fag_cutoff = 20.0;
    c_fag->add_option("input", fag_in, "RGB input as PPM")->required();
    c_fag->add_option("output", fag_out, "guidance map as PGM")->required();
    c_fag->add_option("--lambda", fag_lambda, "intensity-term weight");
    c_fag->add_option("--cutoff", fag_cutoff, "high-pass radius, quoted at 256x256");
    c_fag->callback([&] {
        img::write_gray(fag_out, spectral::fag(img::read_rgb(fag_in), fag_lambda, fag_cutoff));
    });

    // schedule-dump
    auto* c_sched = app.add_subcommand("schedule-dump", "print the noise schedule as CSV");
    int sd_T = 2000;
    double sd_offset = 0.008;
    std::string sd_out;
    c_sched->add_option("--T", sd_T, "number of diffusion steps");
    c_sched->add_option("--offset", sd_offset, "cosine-schedule offset");
    c_sched->add_option("--out", sd_out, "write to a file instead of stdout");
    c_sched->callback([&] {
        const diffusion::NoiseSchedule s = diffusion::cosine_schedule(sd_T, sd_offset);
        std::ostringstream body;
        body << "t,beta,alpha,gamma\n";
        for (int t = 0; t <= s.T; ++t)
            body << t << ',' << fmt(s.beta[std::size_t(t)]) << ',' << fmt(s.alpha[std::size_t(t)])
                 << ',' << fmt(s.gamma[std::size_t(t)]) << '\n';
        if (sd_out.empty())
            std::cout << body.str();
        else
            open_out(sd_out) << body.str();
    });

    // synth-data
    auto* c_synth = app.add_subcommand("synth-data", "generate a synthetic paired dataset");
    std::string sy_dir;
    int sy_n = 200, sy_size = 32, sy_shapes = 3;
    std::uint64_t sy_seed = 1;
    double sy_gain = 0.25, sy_gamma = 1.8, sy_sigma = 0.02;
    c_synth->add_option("dir", sy_dir, "output directory")->required();
    c_synth->add_option("--n", sy_n, "number of pairs");
    c_synth->add_option("--seed", sy_seed, "base seed; pair i uses seed+i");
    c_synth->add_option("--size", sy_size, "square image extent");
    c_synth->add_option("--shapes", sy_shapes, "polygons per scene");
    c_synth->add_option("--gain", sy_gain, "darkening gain for the short exposure");
    c_synth->add_option("--gamma", sy_gamma, "tone-curve exponent");
    c_synth->add_option("--sigma", sy_sigma, "sensor-noise level");
    c_synth->callback([&] {
        run_synth_data(sy_dir, sy_n, sy_seed, sy_size, sy_shapes, sy_gain, sy_gamma, sy_sigma);
    });

    // train
    auto* c_train = app.add_subcommand("train", "train the conditional denoiser");
    std::string tr_config, tr_dir, tr_ckpt, tr_curve;
    std::optional<int> tr_epochs, tr_batch, tr_T, tr_warmup, tr_depth, tr_base;
    std::optional<double> tr_lr, tr_offset, tr_dropout, tr_val_frac;
    std::optional<std::uint64_t> tr_seed;
    bool tr_no_fag = false;
    c_train->add_option("config", tr_config, "hyperparameter file, key = value")->required();
    c_train->add_option("data-dir", tr_dir, "directory holding manifest.tsv")->required();
    c_train->add_option("out-ckpt", tr_ckpt, "checkpoint output path")->required();
    c_train->add_option("--epochs", tr_epochs, "override train.epochs");
    c_train->add_option("--batch-size", tr_batch, "override train.batch_size");
    c_train->add_option("--timesteps", tr_T, "override diffusion.timesteps");
    c_train->add_option("--offset", tr_offset, "override diffusion.offset");
    c_train->add_option("--peak-lr", tr_lr, "override train.peak_lr");
    c_train->add_option("--warmup", tr_warmup, "override train.warmup_steps");
    c_train->add_option("--seed", tr_seed, "override train.seed");
    c_train->add_option("--depth", tr_depth, "override net.depth");
    c_train->add_option("--base-channels", tr_base, "override net.base_channels");
    c_train->add_option("--dropout", tr_dropout, "override net.dropout");
    c_train->add_option("--val-fraction", tr_val_frac, "validation share of the dataset");
    c_train->add_option("--curve", tr_curve, "loss-curve CSV path");
    c_train->add_flag("--no-fag", tr_no_fag, "disable the guidance branch");
    c_train->callback([&] {
        const config::Config file_cfg = config::Config::from_file(tr_config);
        trainer::TrainConfig cfg = train_config_from(file_cfg);
        if (tr_epochs) cfg.epochs = *tr_epochs;
        if (tr_batch) cfg.batch_size = *tr_batch;
        if (tr_T) cfg.timesteps = *tr_T;
        if (tr_offset) cfg.schedule_offset = *tr_offset;
        if (tr_lr) cfg.peak_lr = *tr_lr;
        if (tr_warmup) cfg.warmup_steps = *tr_warmup;
        if (tr_seed) cfg.seed = *tr_seed;
        if (tr_depth) cfg.net.depth = *tr_depth;
        if (tr_base) cfg.net.base_channels = *tr_base;
        if (tr_dropout) cfg.net.dropout = *tr_dropout;
        if (tr_no_fag) cfg.net.fag_enabled = false;
        const double val_frac =
            tr_val_frac ? *tr_val_frac : file_cfg.get_double("train.val_fraction", 0.1);
        run_train(tr_config, tr_dir, tr_ckpt, cfg, val_frac, tr_curve);
    });

    // enhance
    auto* c_enh = app.add_subcommand("enhance", "denoise a low-light image with a checkpoint");
    std::string en_ckpt, en_in, en_out;
    std::uint64_t en_seed = 1;
    c_enh->add_option("ckpt", en_ckpt, "trained checkpoint")->required();
    c_enh->add_option("input", en_in, "low-light PGM")->required();
    c_enh->add_option("output", en_out, "enhanced PGM")->required();
    c_enh->add_option("--seed", en_seed, "sampling seed");
    c_enh->callback([&] { run_enhance(en_ckpt, en_in, en_out, en_seed); });

    // metrics
    auto* c_met = app.add_subcommand("metrics", "score image pairs: PSNR, SSIM, FSIM");
    std::string me_a, me_b, me_manifest;
    c_met->add_option("a", me_a, "image or manifest");
    c_met->add_option("b", me_b, "image or manifest");
    c_met->add_option("--manifest", me_manifest, "score each low/high row of one manifest");
    c_met->callback([&] {
        if (me_manifest.empty() && (me_a.empty() || me_b.empty()))
            throw CLI::ValidationError("metrics", "need two paths or --manifest");
        run_metrics(me_a, me_b, me_manifest);
    });

    // workspace
    auto* c_ws = app.add_subcommand("workspace", "enumerate collision-free capture poses");
    std::string ws_cfg, ws_out;
    std::size_t ws_candidates = 2000;
    std::uint64_t ws_seed = 1;
    c_ws->add_option("chain-config", ws_cfg, "robot/scene description, key = value")->required();
    c_ws->add_option("--candidates", ws_candidates, "low-discrepancy candidates to screen");
    c_ws->add_option("--seed", ws_seed, "accepted for interface parity; scan is deterministic");
    c_ws->add_option("--out", ws_out, "CSV output path (default stdout)");
    c_ws->callback([&] {
        const config::Config cfg = config::Config::from_file(ws_cfg);
        const posegen::KinematicChain chain = posegen::chain_from_config(cfg);
        const posegen::CollisionScene scene = posegen::scene_from_config(cfg);
        posegen::WorkspaceStats stats;
        const auto records = posegen::build_workspace(chain, scene, ws_candidates, &stats);
        if (ws_out.empty()) {
            write_workspace_csv(std::cout, records);
        } else {
            auto f = open_out(ws_out);
            write_workspace_csv(f, records);
        }
        std::cerr << "candidates " << stats.candidates << " feasible " << records.size()
                  << " rejected_path " << stats.rejected_path << " rejected_spin "
                  << stats.rejected_spin << "\n";
    });

    // sample-poses
    auto* c_sp = app.add_subcommand("sample-poses", "stratified draw from a workspace CSV");
    std::string sp_ws, sp_bins = "3,4,3", sp_out;
    std::size_t sp_k = 20;
    std::uint64_t sp_seed = 1;
    c_sp->add_option("workspace", sp_ws, "workspace CSV from the workspace subcommand")
        ->required();
    c_sp->add_option("--bins", sp_bins, "strata counts as r,az,el");
    c_sp->add_option("--k", sp_k, "number of poses to draw");
    c_sp->add_option("--seed", sp_seed, "sampling seed");
    c_sp->add_option("--out", sp_out, "CSV output path (default stdout)");
    c_sp->callback([&] {
        const auto records = read_workspace_csv(sp_ws);
        Rng rng(sp_seed);
        const auto picks = posegen::stratified_sample(records, parse_bins(sp_bins), sp_k, rng);
        if (sp_out.empty()) {
            write_workspace_csv(std::cout, picks);
        } else {
            auto f = open_out(sp_out);
            write_workspace_csv(f, picks);
        }
    });

    // workspace-plot
    auto* c_wp = app.add_subcommand("workspace-plot",
                                    "project payload positions onto the x-z and y-z planes");
    std::string wp_cfg, wp_ws, wp_xz = "workspace_xz.csv", wp_yz = "workspace_yz.csv";
    c_wp->add_option("chain-config", wp_cfg, "robot/scene description")->required();
    c_wp->add_option("workspace", wp_ws, "workspace CSV")->required();
    c_wp->add_option("--out-xz", wp_xz, "x-z point cloud CSV");
    c_wp->add_option("--out-yz", wp_yz, "y-z point cloud CSV");
    c_wp->callback([&] {
        const posegen::KinematicChain chain =
            posegen::chain_from_config(config::Config::from_file(wp_cfg));
        auto fxz = open_out(wp_xz);
        auto fyz = open_out(wp_yz);
        fxz << "x,z\n";
        fyz << "y,z\n";
        for (const posegen::PoseRecord& rec : read_workspace_csv(wp_ws)) {
            if (!rec.feasible) continue;
            const Eigen::Vector3d p =
                (posegen::fk(chain, rec.q).ee() * chain.payload_mount).translation();
            fxz << fmt(p.x()) << ',' << fmt(p.z()) << '\n';
            fyz << fmt(p.y()) << ',' << fmt(p.z()) << '\n';
        }
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
