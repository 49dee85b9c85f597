#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "refnet/checkpoint.hpp"
#include "refnet/config.hpp"
#include "refnet/evaluate.hpp"
#include "refnet/image_io.hpp"
#include "refnet/plot.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace refnet;

namespace {

struct TrainFlags {
    std::string config_path, data_dir, out_dir, resume_path;
    std::vector<std::string> ablations;
    int k = -1;
    long long seed = -1;
    int iterations = -1;
    int batch = -1;
    double lr = -1, tau = -1, lambda_gp = -1, xi = -1, zeta = -1, eta = -1;
    int n_critic = -1;
    double neg_ratio = -1, labeled_ratio = -1;
    int self_sup_radius = -1;
    int depth = -1, base_width = -1;
    int checkpoint_every = -1;
    int num_workers = -1;
    bool swap_alternation = false;
    bool no_augment = false;
    bool plot = false;
};

AppConfig resolve_config(const std::string& path) {
    if (path.empty()) return default_app_config();
    return load_config_file(path);
}

void apply_train_flags(AppConfig& cfg, const TrainFlags& f) {
    for (const auto& a : f.ablations) apply_ablation(cfg.train.toggles, a);
    if (f.k >= 0) cfg.train.k_references = f.k;
    if (f.seed >= 0) cfg.train.seed = static_cast<std::uint64_t>(f.seed);
    if (f.iterations >= 0) cfg.train.max_iterations = f.iterations;
    if (f.batch >= 0) cfg.train.batch = f.batch;
    if (f.lr > 0) cfg.train.lr = f.lr;
    if (f.tau >= 0) cfg.train.weights.tau = f.tau;
    if (f.lambda_gp >= 0) cfg.train.weights.lambda_gp = f.lambda_gp;
    if (f.xi >= 0) cfg.train.weights.xi = f.xi;
    if (f.zeta >= 0) cfg.train.weights.zeta = f.zeta;
    if (f.eta >= 0) cfg.train.weights.eta = f.eta;
    if (f.n_critic >= 1) cfg.train.n_critic = f.n_critic;
    if (f.neg_ratio >= 0) cfg.train.neg_ratio = f.neg_ratio;
    if (f.labeled_ratio >= 0) cfg.train.labeled_ratio = f.labeled_ratio;
    if (f.self_sup_radius >= 1) cfg.train.self_sup_radius = f.self_sup_radius;
    if (f.depth >= 1) cfg.train.arch.depth = f.depth;
    if (f.base_width >= 1) cfg.train.arch.base_width = f.base_width;
    if (f.checkpoint_every >= 0) cfg.train.checkpoint_every = f.checkpoint_every;
    if (f.num_workers >= 0) cfg.train.num_workers = f.num_workers;
    if (f.swap_alternation) cfg.train.swap_alternation = true;
    if (f.no_augment) cfg.train.augment = false;
}

void plot_train_log(const std::string& log_path, const std::string& out_path) {
    std::ifstream in(log_path);
    PlotSeries dice{"L DIC", {}}, rep{"L REP", {}}, sel{"L SEL", {}}, total{"L TOTAL", {}};
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        if (j.value("kind", "") != "segmenter") continue;
        dice.values.push_back(j.value("L_dic", 0.0));
        rep.values.push_back(j.value("L_rep", 0.0));
        sel.values.push_back(j.value("L_sel", 0.0));
        total.values.push_back(j.value("L_total", 0.0));
    }
    write_line_chart(out_path, {dice, rep, sel, total}, "TRAINING LOSS");
}

int cmd_gen_data(const std::string& config_path, const std::string& out_dir, long long seed) {
    AppConfig cfg = resolve_config(config_path);
    const std::uint64_t s = seed >= 0 ? static_cast<std::uint64_t>(seed) : cfg.train.seed;
    const DatasetIndex index = build_splits(cfg.data, out_dir, s);
    std::cout << "dataset written to " << out_dir << ": " << index.records.size()
              << " records, target categories [";
    for (std::size_t i = 0; i < index.target_categories.size(); ++i)
        std::cout << (i ? ", " : "") << index.target_categories[i];
    std::cout << "], open-source categories [";
    for (std::size_t i = 0; i < index.open_categories.size(); ++i)
        std::cout << (i ? ", " : "") << index.open_categories[i];
    std::cout << "]\n";
    return 0;
}

int cmd_train(const TrainFlags& f) {
    AppConfig cfg = resolve_config(f.config_path);
    apply_train_flags(cfg, f);

    const DatasetIndex index = load_index(f.data_dir);
    DatasetReader reader(index);
    fs::create_directories(f.out_dir);

    TrainState state;
    std::ios_base::openmode mode = std::ios::out;
    if (!f.resume_path.empty()) {
        state = load_checkpoint(f.resume_path);
        mode = std::ios::app;
        std::cerr << "resuming from " << f.resume_path << " at iteration " << state.iteration
                  << "\n";
    } else {
        state = TrainState::init(cfg.train);
    }
    std::ofstream log(f.out_dir + "/train_log.jsonl", mode);
    if (!log) throw std::runtime_error("cannot open log file in " + f.out_dir);

    const TrainResult res = train(cfg.train, index, reader, state, f.out_dir, &log);
    log.flush();
    if (res.nan_abort) {
        std::cerr << "training aborted (" << res.nan_message << "); last checkpoint retained\n";
        return 1;
    }
    {
        std::ofstream cfg_echo(f.out_dir + "/config.json");
        cfg_echo << serialize_config(cfg) << "\n";
    }
    if (f.plot) plot_train_log(f.out_dir + "/train_log.jsonl", f.out_dir + "/loss_curves.ppm");
    std::cout << "trained " << res.iterations << " iterations; checkpoint at "
              << res.checkpoint_path << "\n";
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_dir,
             const std::string& report_path, const std::string& config_path, bool oracle_stub,
             bool average_references, bool plot) {
    AppConfig cfg = resolve_config(config_path);
    cfg.eval.oracle_stub = oracle_stub;
    if (average_references) cfg.eval.average_references = true;

    const DatasetIndex index = load_index(data_dir);
    DatasetReader reader(index);

    std::unique_ptr<Segmenter> model;
    if (oracle_stub && ckpt_path.empty()) {
        ArchConfig tiny;
        tiny.depth = 1;
        tiny.base_width = 2;
        model = std::make_unique<Segmenter>(tiny, 0); // never queried by the stub
    } else {
        TrainState state = load_checkpoint(ckpt_path);
        if (!config_path.empty() && !(state.arch == cfg.train.arch))
            throw std::runtime_error("architecture mismatch: checkpoint has " +
                                     describe(state.arch) + " but config requests " +
                                     describe(cfg.train.arch));
        model = std::move(state.model);
    }

    const MetricReport report = evaluate(*model, index, reader, cfg.eval);
    if (!report_path.empty()) {
        std::ofstream out(report_path);
        if (!out) throw std::runtime_error("cannot open report file " + report_path);
        out << report.to_text();
    }
    if (plot) {
        std::vector<std::pair<std::string, double>> bars;
        for (const auto& [cat, ce] : report.per_category)
            bars.emplace_back(cat, ce.metrics.mean_iou);
        const std::string plot_path =
            report_path.empty() ? "per_category_iou.ppm" : report_path + ".iou.ppm";
        write_bar_chart(plot_path, bars, "PER CATEGORY MIOU");
    }
    std::cout << report.summary_line() << "\n";
    return 0;
}

Image pad_reflect(const Image& img, int stride, bool& padded) {
    const int h2 = (img.height + stride - 1) / stride * stride;
    const int w2 = (img.width + stride - 1) / stride * stride;
    padded = h2 != img.height || w2 != img.width;
    if (!padded) return img;
    Image out(h2, w2, img.channels);
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < h2; ++y)
            for (int x = 0; x < w2; ++x) {
                int sy = y < img.height ? y : 2 * img.height - 2 - y;
                int sx = x < img.width ? x : 2 * img.width - 2 - x;
                sy = std::clamp(sy, 0, img.height - 1);
                sx = std::clamp(sx, 0, img.width - 1);
                out.at(c, y, x) = img.at(c, sy, sx);
            }
    return out;
}

int cmd_predict(const std::string& ckpt_path, const std::string& image_path,
                const std::string& ref_image_path, const std::string& ref_mask_path,
                const std::string& out_path, const std::string& soft_path) {
    TrainState state = load_checkpoint(ckpt_path);
    const Segmenter& model = *state.model;

    const Image target = read_ppm(image_path);
    const Image ref_img = read_ppm(ref_image_path);
    const BinaryMask ref_mask = read_pgm_binary(ref_mask_path);
    if (ref_img.height != ref_mask.height || ref_img.width != ref_mask.width)
        throw std::runtime_error("reference image and mask dimensions differ");

    const int stride = state.arch.stride();
    bool padded_t = false, padded_r = false;
    const Image target_p = pad_reflect(target, stride, padded_t);
    const Image ref_p = pad_reflect(masked_image(ref_img, ref_mask), stride, padded_r);
    if (padded_t || padded_r)
        std::cerr << "warning: input size not divisible by the model stride " << stride
                  << "; padded by reflection and cropped back\n";
    if (target_p.height != ref_p.height || target_p.width != ref_p.width)
        throw std::runtime_error("target and reference resolutions differ after padding");

    nn::GradMode off(false);
    const nn::Tensor pred = model.segment(to_tensor(std::vector<Image>{target_p}),
                                          to_tensor(std::vector<Image>{ref_p}));
    const SoftMask soft_full = soft_mask_from_tensor(pred, 0);

    SoftMask soft(target.height, target.width);
    for (int y = 0; y < target.height; ++y)
        for (int x = 0; x < target.width; ++x) soft.at(y, x) = soft_full.at(y, x);

    write_pgm(out_path, soft.binarize(0.5f));
    if (!soft_path.empty()) write_pgm16(soft_path, soft);
    std::cout << "mask written to " << out_path << "\n";
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir, long long seed,
              int iterations) {
    AppConfig base = resolve_config(config_path);
    const std::vector<ShapeCategory> all = {ShapeCategory::Circle,  ShapeCategory::Square,
                                            ShapeCategory::Triangle, ShapeCategory::Cross,
                                            ShapeCategory::Star,    ShapeCategory::Ring};
    const std::uint64_t s = seed >= 0 ? static_cast<std::uint64_t>(seed) : base.train.seed;
    fs::create_directories(out_dir);

    json table;
    std::map<std::string, std::map<int, double>> iou; // category -> C -> IoU
    for (int c_num = 1; c_num + 1 <= static_cast<int>(all.size()); ++c_num) {
        AppConfig cfg = base;
        cfg.data.target_spec.categories.assign(all.begin(), all.begin() + c_num);
        cfg.data.open_spec.categories.assign(all.begin() + c_num, all.end());
        cfg.data.counts.target = std::max(40, 30 * c_num);
        cfg.data.counts.heldout = std::max(24, 12 * c_num);
        cfg.data.counts.open_source = 80;
        cfg.train.seed = s;
        if (iterations > 0) cfg.train.max_iterations = iterations;

        const std::string run_dir = out_dir + "/cnum_" + std::to_string(c_num);
        const DatasetIndex index = build_splits(cfg.data, run_dir + "/data", s + c_num);
        DatasetReader reader(index);
        TrainState state = TrainState::init(cfg.train);
        std::ofstream log(run_dir + "/train_log.jsonl");
        std::cerr << "sweep: training with " << c_num << " target categories...\n";
        const TrainResult res = train(cfg.train, index, reader, state, run_dir, &log);
        if (res.nan_abort) {
            std::cerr << "sweep run " << c_num << " aborted: " << res.nan_message << "\n";
            continue;
        }
        const MetricReport report = evaluate(*state.model, index, reader, cfg.eval);
        for (const auto& [cat, ce] : report.per_category) {
            iou[cat][c_num] = ce.metrics.mean_iou;
            table[cat][std::to_string(c_num)] = ce.metrics.mean_iou;
        }
    }

    std::ofstream jout(out_dir + "/sweep_table.json");
    jout << table.dump(2) << "\n";
    std::ostringstream text;
    text << "category";
    for (std::size_t c = 1; c + 1 <= all.size(); ++c) text << "\tC=" << c;
    text << "\n";
    for (const auto& [cat, row] : iou) {
        text << cat;
        for (int c = 1; c + 1 <= static_cast<int>(all.size()); ++c) {
            text << "\t";
            auto it = row.find(c);
            if (it == row.end()) text << "-";
            else text << it->second;
        }
        text << "\n";
    }
    std::ofstream tout(out_dir + "/sweep_table.txt");
    tout << text.str();
    std::cout << text.str();
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ref-Net reference segmentation: synthetic data generation, adversarial "
                 "boundary-knowledge training, evaluation and prediction"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset directory");
    std::string gen_config, gen_out;
    long long gen_seed = -1;
    gen->add_option("--config", gen_config, "JSON config file");
    gen->add_option("--out", gen_out, "output dataset directory")->required();
    gen->add_option("--seed", gen_seed, "generation seed");

    // train
    auto* tr = app.add_subcommand("train", "train the reference segmentation network");
    TrainFlags tf;
    tr->add_option("--config", tf.config_path, "JSON config file");
    tr->add_option("--data", tf.data_dir, "dataset directory")->required();
    tr->add_option("--out", tf.out_dir, "output directory (checkpoint, logs)")->required();
    tr->add_option("--ablate", tf.ablations,
                   "disable components: self, cond, pseu, inner, outer, dice (disc = inner+outer)")
        ->check(CLI::IsMember({"self", "cond", "pseu", "inner", "outer", "dice", "disc"}));
    tr->add_option("--k", tf.k, "labeled reference samples per category (0 = all)");
    tr->add_option("--seed", tf.seed, "training seed");
    tr->add_option("--iterations", tf.iterations, "segmenter steps");
    tr->add_option("--batch", tf.batch, "batch size");
    tr->add_option("--lr", tf.lr, "learning rate for all networks");
    tr->add_option("--tau", tf.tau, "Dice smoothing");
    tr->add_option("--lambda", tf.lambda_gp, "gradient penalty coefficient");
    tr->add_option("--xi", tf.xi, "Dice weight");
    tr->add_option("--zeta", tf.zeta, "representation-consistency weight");
    tr->add_option("--eta", tf.eta, "self-supervision weight");
    tr->add_option("--n-critic", tf.n_critic, "critic updates per segmenter update");
    tr->add_option("--neg-ratio", tf.neg_ratio, "negative pair fraction");
    tr->add_option("--labeled-ratio", tf.labeled_ratio, "labeled pair fraction");
    tr->add_option("--self-sup-radius", tf.self_sup_radius, "boundary band radius");
    tr->add_option("--depth", tf.depth, "encoder depth");
    tr->add_option("--base-width", tf.base_width, "encoder base width");
    tr->add_option("--checkpoint-every", tf.checkpoint_every, "checkpoint interval");
    tr->add_option("--num-workers", tf.num_workers,
                   "loader workers (capped by REFNET_NUM_WORKERS)");
    tr->add_flag("--swap-alternation", tf.swap_alternation,
                 "alternate in equal blocks instead of n_critic:1");
    tr->add_flag("--no-augment", tf.no_augment, "disable data augmentation");
    tr->add_option("--resume", tf.resume_path, "checkpoint to resume from");
    tr->add_flag("--plot", tf.plot, "write loss-curve figure");

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on the held-out split");
    std::string ev_ckpt, ev_data, ev_report, ev_config;
    bool ev_oracle = false, ev_avg = false, ev_plot = false;
    ev->add_option("--checkpoint", ev_ckpt, "checkpoint file");
    ev->add_option("--data", ev_data, "dataset directory")->required();
    ev->add_option("--report", ev_report, "report output file");
    ev->add_option("--config", ev_config, "JSON config file (architecture consistency check)");
    ev->add_flag("--oracle-stub", ev_oracle, "test hook: evaluate a perfect oracle");
    ev->add_flag("--average-references", ev_avg, "average predictions over all references");
    ev->add_flag("--plot", ev_plot, "write per-category IoU figure");

    // predict
    auto* pr = app.add_subcommand("predict", "segment one image given a reference");
    std::string pr_ckpt, pr_image, pr_ref_image, pr_ref_mask, pr_out, pr_soft;
    pr->add_option("--checkpoint", pr_ckpt)->required();
    pr->add_option("--image", pr_image, "target image (PPM)")->required();
    pr->add_option("--reference-image", pr_ref_image, "reference image (PPM)")->required();
    pr->add_option("--reference-mask", pr_ref_mask, "reference mask (PGM)")->required();
    pr->add_option("--out", pr_out, "binarized mask output (PGM)")->required();
    pr->add_option("--soft", pr_soft, "optional soft-mask output (16-bit PGM)");

    // sweep-categories
    auto* sw = app.add_subcommand(
        "sweep-categories", "incremental-category protocol: per-category IoU vs category count");
    std::string sw_config, sw_out;
    long long sw_seed = -1;
    int sw_iters = 200;
    sw->add_option("--config", sw_config, "JSON config file");
    sw->add_option("--out", sw_out, "output directory")->required();
    sw->add_option("--seed", sw_seed, "seed");
    sw->add_option("--iterations", sw_iters, "segmenter steps per run");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e); // help goes to stdout, exit 0
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(gen_config, gen_out, gen_seed);
        if (tr->parsed()) return cmd_train(tf);
        if (ev->parsed())
            return cmd_eval(ev_ckpt, ev_data, ev_report, ev_config, ev_oracle, ev_avg, ev_plot);
        if (pr->parsed())
            return cmd_predict(pr_ckpt, pr_image, pr_ref_image, pr_ref_mask, pr_out, pr_soft);
        if (sw->parsed()) return cmd_sweep(sw_config, sw_out, sw_seed, sw_iters);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
