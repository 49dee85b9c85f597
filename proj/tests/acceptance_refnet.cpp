// Acceptance suite: runs every acceptance criterion end-to-end and prints
// one [PASS]/[FAIL] line per criterion. Exit code = number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "refnet/checkpoint.hpp"
#include "refnet/config.hpp"
#include "refnet/evaluate.hpp"
#include "refnet/losses.hpp"
#include "refnet/morphology.hpp"

using namespace refnet;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- criterion 1
BinaryMask dilate_oracle(const BinaryMask& m, int r) {
    BinaryMask out(m.height, m.width);
    const DiskStrel s = disk_strel(r);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            if (!m.at(y, x)) continue;
            for (const auto& [dy, dx] : s.offsets) {
                const int ny = y + dy, nx = x + dx;
                if (ny >= 0 && ny < m.height && nx >= 0 && nx < m.width) out.at(ny, nx) = 1;
            }
        }
    return out;
}

BinaryMask erode_oracle(const BinaryMask& m, int r) {
    BinaryMask out(m.height, m.width);
    const DiskStrel s = disk_strel(r);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            bool all = true;
            for (const auto& [dy, dx] : s.offsets) {
                const int ny = y + dy, nx = x + dx;
                if (ny < 0 || ny >= m.height || nx < 0 || nx >= m.width) continue;
                if (!m.at(ny, nx)) { all = false; break; }
            }
            out.at(y, x) = all;
        }
    return out;
}

void criterion_1_morphology() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(2024);
    bool ok = true;
    for (int trial = 0; trial < 200 && ok; ++trial) {
        BinaryMask m(16, 16);
        const double p = rng.uniform(0.1, 0.9);
        for (auto& v : m.grid) v = rng.bernoulli(p) ? 1 : 0;
        for (int r : {1, 2, 3}) {
            const BinaryMask d = dilate(m, r), e = erode(m, r);
            if (!(d == dilate_oracle(m, r)) || !(e == erode_oracle(m, r))) ok = false;
            BinaryMask w_oracle(16, 16);
            const BinaryMask dd = dilate_oracle(m, r), ee = erode_oracle(m, r);
            for (std::size_t i = 0; i < w_oracle.grid.size(); ++i)
                w_oracle.grid[i] = dd.grid[i] - ee.grid[i];
            if (!(boundary_weight_map(m, r) == w_oracle)) ok = false;
        }
    }
    const double secs = seconds_since(t0);
    report(1, ok && secs < 10.0,
           "morphology vs brute-force oracles, 200 random 16x16 masks, r in {1,2,3}, exact "
           "match, " + std::to_string(secs).substr(0, 5) + " s (< 10 s)");
}

// ---------------------------------------------------------------- criterion 2
void criterion_2_loss_identities() {
    const auto t0 = std::chrono::steady_clock::now();
    using nn::Tensor;
    bool ok = true;
    std::string why;

    auto expect = [&](bool cond, const std::string& what) {
        if (!cond && ok) { ok = false; why = what; }
    };

    // dice identity / empty / disjoint to 1e-9
    {
        std::vector<double> ten(64, 0.0);
        std::fill_n(ten.begin(), 10, 1.0);
        const Tensor m = Tensor::from_data({1, 1, 8, 8}, std::move(ten));
        expect(std::abs(dice_loss(m, m, 1.0).item()) < 1e-9, "dice identity");
        const Tensor z = Tensor::zeros({1, 1, 8, 8});
        expect(std::abs(dice_loss(z, z, 1.0).item()) < 1e-9, "dice empty");
        std::vector<double> a(64, 0.0), b(64, 0.0);
        std::fill_n(a.begin(), 8, 1.0);
        std::fill(b.begin() + 8, b.begin() + 16, 1.0);
        const double got = dice_loss(Tensor::from_data({1, 1, 8, 8}, std::move(a)),
                                     Tensor::from_data({1, 1, 8, 8}, std::move(b)), 1.0)
                               .item();
        expect(std::abs(got - (1.0 - 1.0 / 17.0)) < 1e-9, "dice disjoint 1-1/17");
    }

    // self-supervision at identity == 0 exactly
    {
        ArchConfig arch;
        arch.depth = 2;
        arch.base_width = 8;
        Segmenter model(arch, 5);
        Rng rng(7);
        std::vector<double> tv(3 * 32 * 32), rv(3 * 32 * 32);
        for (auto& v : tv) v = rng.uniform();
        for (auto& v : rv) v = rng.uniform();
        const Tensor t = Tensor::from_data({1, 3, 32, 32}, std::move(tv));
        const Tensor r = Tensor::from_data({1, 3, 32, 32}, std::move(rv));
        expect(self_supervision_loss(model, t, r, AffineTransform::identity(), 2).item() == 0.0,
               "self-supervision identity == 0");
    }

    // mmd(A, A) == 0 to 1e-9
    {
        Rng rng(8);
        std::vector<double> fv(6 * 5);
        for (auto& v : fv) v = rng.uniform(-1, 1);
        const Tensor a = Tensor::from_data({6, 5}, std::vector<double>(fv));
        const Tensor b = Tensor::from_data({6, 5}, std::vector<double>(fv));
        expect(std::abs(mmd_loss(a, b, MmdKernelConfig{}).item()) < 1e-9, "mmd(A,A) == 0");
    }

    // gradient penalty analytic cases to 1e-6
    {
        Rng rng(9);
        auto rnd = [&](nn::Shape s) {
            std::vector<double> v(nn::shape_numel(s));
            for (auto& x : v) x = rng.uniform();
            return Tensor::from_data(s, std::move(v));
        };
        const Triplet fake = make_fake_triplet(rnd({2, 3, 8, 8}), rnd({2, 1, 8, 8}), Side::Outer);
        const Triplet real =
            make_real_triplet(rnd({2, 3, 8, 8}), Tensor::zeros({2, 1, 8, 8}), Side::Outer);
        const std::vector<double> eps{0.25, 0.75};

        Critic constant(CriticConfig{.base_width = 8}, 3);
        constant.zero_head();
        const double gp_const =
            gradient_penalty([&](const Tensor& t) { return constant.score(t); }, real, fake, eps,
                             10.0)
                .item();
        expect(std::abs(gp_const - 10.0) < 1e-6, "constant critic -> lambda");

        std::vector<double> coef(7 * 8 * 8);
        double n2 = 0;
        for (auto& v : coef) {
            v = rng.uniform(-1, 1);
            n2 += v * v;
        }
        for (auto& v : coef) v /= std::sqrt(n2);
        const Tensor coef_t = Tensor::from_data({1, 7, 8, 8}, std::move(coef));
        auto linear = [&](const Tensor& t) {
            std::vector<double> tiled(t.vec().size());
            for (int n = 0; n < t.shape()[0]; ++n)
                std::copy(coef_t.vec().begin(), coef_t.vec().end(),
                          tiled.begin() + static_cast<std::size_t>(n) * coef_t.numel());
            return nn::sum_per_sample(nn::mul(t, Tensor::from_data(t.shape(), std::move(tiled))));
        };
        expect(std::abs(gradient_penalty(linear, real, fake, eps, 10.0).item()) < 1e-6,
               "unit-norm linear critic -> 0");
    }

    const double secs = seconds_since(t0);
    report(2, ok && secs < 30.0,
           ok ? "loss identities (dice exact cases, self-sup identity, mmd(A,A), gradient "
                "penalty analytic cases), " + std::to_string(secs).substr(0, 5) + " s (< 30 s)"
              : "loss identity failed: " + why);
}

// ---------------------------------------------------------------- criterion 3
void criterion_3_gradient_checks() {
    const auto t0 = std::chrono::steady_clock::now();
    using nn::Tensor;
    Rng rng(11);
    bool ok = true;
    double worst_dice = 0, worst_critic = 0;

    {
        std::vector<double> pv(64), gv(64);
        for (auto& v : pv) v = rng.uniform(0.05, 0.95);
        for (auto& v : gv) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
        Tensor pred = Tensor::leaf({1, 1, 8, 8}, std::move(pv), true);
        const Tensor gt = Tensor::from_data({1, 1, 8, 8}, std::move(gv));
        auto f = [&] { return dice_loss(pred, gt, 1.0); };
        nn::GradMap grads = nn::backward(f());
        const Tensor g = grads.at(pred);
        for (int i = 0; i < 64; ++i) {
            const double saved = pred.data()[i];
            const double step = 1e-4;
            pred.data()[i] = saved + step;
            const double fp = f().item();
            pred.data()[i] = saved - step;
            const double fm = f().item();
            pred.data()[i] = saved;
            const double fd = (fp - fm) / (2 * step);
            worst_dice = std::max(worst_dice,
                                  std::abs(fd - g.data()[i]) / std::max(std::abs(fd), 1e-8));
        }
        if (worst_dice >= 1e-3) ok = false;
    }

    {
        Critic critic(CriticConfig{.base_width = 8}, 13);
        std::vector<double> tv(7 * 64);
        for (auto& v : tv) v = rng.uniform();
        Tensor trip = Tensor::leaf({1, 7, 8, 8}, std::move(tv), true);
        auto f = [&] { return nn::sum(critic.score(trip)); };
        nn::GradMap grads = nn::backward(f());
        const Tensor g = grads.at(trip);
        for (int i = 0; i < trip.numel(); ++i) {
            const double saved = trip.data()[i];
            const double step = 1e-4;
            trip.data()[i] = saved + step;
            const double fp = f().item();
            trip.data()[i] = saved - step;
            const double fm = f().item();
            trip.data()[i] = saved;
            const double fd = (fp - fm) / (2 * step);
            worst_critic = std::max(worst_critic,
                                    std::abs(fd - g.data()[i]) / std::max(std::abs(fd), 1e-6));
        }
        if (worst_critic >= 1e-3) ok = false;
    }

    const double secs = seconds_since(t0);
    std::ostringstream os;
    os.precision(2);
    os << std::scientific << "dice-loss and critic-score gradients vs central differences "
       << "(step 1e-4): max rel err " << worst_dice << " / " << worst_critic << " (< 1e-3), "
       << std::fixed << secs << " s (< 60 s)";
    report(3, ok && secs < 60.0, os.str());
}

// ---------------------------------------------------------------- criterion 4
void criterion_4_metric_oracle() {
    Rng rng(17);
    bool ok = true;
    for (int trial = 0; trial < 50; ++trial) {
        BinaryMask pred(16, 16), gt(16, 16);
        const double pp = rng.uniform(0.0, 1.0), pg = rng.uniform(0.0, 1.0);
        for (auto& v : pred.grid) v = rng.bernoulli(pp) ? 1 : 0;
        for (auto& v : gt.grid) v = rng.bernoulli(pg) ? 1 : 0;
        if (trial == 0) { pred = BinaryMask(16, 16); gt = BinaryMask(16, 16); }
        if (trial == 1) {
            for (auto& v : gt.grid) v = rng.bernoulli(0.5) ? 1 : 0;
            pred = gt.complement();
        }
        // per-pixel counting oracle
        std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
        for (std::size_t i = 0; i < pred.grid.size(); ++i) {
            tp += (pred.grid[i] && gt.grid[i]);
            fp += (pred.grid[i] && !gt.grid[i]);
            fn += (!pred.grid[i] && gt.grid[i]);
            tn += (!pred.grid[i] && !gt.grid[i]);
        }
        const ConfusionCounts c = confusion_counts(pred, gt);
        if (c.tp != tp || c.fp != fp || c.fn != fn || c.tn != tn) ok = false;

        const Metrics m = metrics_from_counts(c);
        const double n = static_cast<double>(c.total());
        const double pa = (tp + tn) / n;
        double acc = 0, iou = 0, fw = 0;
        int cls = 0;
        if (tp + fp + fn > 0) {
            const double a = (tp + fn) ? static_cast<double>(tp) / (tp + fn) : 0.0;
            const double i = static_cast<double>(tp) / (tp + fp + fn);
            acc += a; iou += i; fw += (tp + fn) / n * i; ++cls;
        }
        if (tn + fp + fn > 0) {
            const double a = (tn + fp) ? static_cast<double>(tn) / (tn + fp) : 0.0;
            const double i = static_cast<double>(tn) / (tn + fp + fn);
            acc += a; iou += i; fw += (tn + fp) / n * i; ++cls;
        }
        if (std::abs(m.pixel_accuracy - pa) > 0 ||
            std::abs(m.mean_pixel_accuracy - (cls ? acc / cls : 0)) > 0 ||
            std::abs(m.mean_iou - (cls ? iou / cls : 0)) > 0 || std::abs(m.fw_iou - fw) > 0)
            ok = false;
    }
    report(4, ok,
           "PA/MPA/MIoU/FWIoU equal the per-pixel counting oracle on 50 random pairs "
           "(including both-empty and total-disagreement)");
}

// ------------------------------------------------------- smoke infrastructure
struct SmokeArtifacts {
    std::vector<json> log;
    MetricReport report;
    std::uint64_t final_seg_checksum = 0;
    double train_seconds = 0;
    double final_dice = 0;
    TrainState state;
};

std::vector<json> parse_log_text(const std::string& text) {
    std::vector<json> out;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line))
        if (!line.empty()) out.push_back(json::parse(line));
    return out;
}

// the acceptance smoke configuration: dataset defaults from the spec'd
// default synthetic config; training defaults with the step budget below
constexpr int kSmokeIterations = 800;

TrainConfig smoke_train_config() {
    TrainConfig cfg = default_app_config().train;
    cfg.max_iterations = kSmokeIterations;
    cfg.seed = 2026;
    cfg.checkpoint_every = 0;
    return cfg;
}

SmokeArtifacts run_smoke(const DatasetIndex& index, const fs::path& dir, const TrainConfig& cfg) {
    DatasetReader reader(index);
    SmokeArtifacts art;
    art.state = TrainState::init(cfg);
    std::ostringstream log;
    const auto t0 = std::chrono::steady_clock::now();
    const TrainResult res = train(cfg, index, reader, art.state, dir.string(), &log);
    art.train_seconds = seconds_since(t0);
    if (res.nan_abort) throw std::runtime_error("smoke aborted: " + res.nan_message);
    art.log = parse_log_text(log.str());
    art.final_seg_checksum = art.state.model->params().checksum();
    art.report = evaluate(*art.state.model, index, reader, EvalConfig{});
    double acc = 0;
    int n = 0;
    for (auto it = art.log.rbegin(); it != art.log.rend() && n < 20; ++it)
        if ((*it)["kind"] == "segmenter") {
            acc += (*it)["L_dic"].get<double>();
            ++n;
        }
    art.final_dice = n ? acc / n : 1.0;
    return art;
}

// ---------------------------------------------------------------- criterion 5
void criterion_5_alternation(const SmokeArtifacts& art, int n_critic) {
    bool ok = true;
    int critics_since_seg = 0;
    std::uint64_t seg_ck = 0, out_ck = 0, in_ck = 0;
    bool have_prev = false;
    for (const auto& r : art.log) {
        const auto& ck = r.at("checksums");
        if (r.at("kind") == "critic") {
            ++critics_since_seg;
            if (have_prev && ck.at("seg").get<std::uint64_t>() != seg_ck) ok = false;
        } else {
            if (critics_since_seg != n_critic) ok = false;
            critics_since_seg = 0;
            if (have_prev && (ck.at("critic_out").get<std::uint64_t>() != out_ck ||
                              ck.at("critic_in").get<std::uint64_t>() != in_ck))
                ok = false;
        }
        seg_ck = ck.at("seg").get<std::uint64_t>();
        out_ck = ck.at("critic_out").get<std::uint64_t>();
        in_ck = ck.at("critic_in").get<std::uint64_t>();
        have_prev = true;
    }
    report(5, ok,
           "step log shows exactly n_c=" + std::to_string(n_critic) +
               " critic updates per segmenter update; checksums prove critics untouched by "
               "segmenter steps and vice versa");
}

// ---------------------------------------------------------------- criterion 6
void criterion_6_smoke(const SmokeArtifacts& art) {
    const double miou = art.report.metrics.mean_iou;
    const bool ok = miou >= 0.80 && art.final_dice < 0.2 && art.train_seconds < 1800.0;
    std::ostringstream os;
    os.precision(4);
    os << "overfit smoke (" << kSmokeIterations << " segmenter steps <= 2000): held-out MIoU "
       << miou << " (>= 0.80), training Dice " << art.final_dice << " (< 0.2), "
       << static_cast<int>(art.train_seconds) << " s (< 1800 s)";
    report(6, ok, os.str());

    // module invariant (not a numbered criterion): the smoke loss decreases
    std::vector<double> dice;
    for (const auto& r : art.log)
        if (r.at("kind") == "segmenter") dice.push_back(r.at("L_dic").get<double>());
    const std::size_t q = dice.size() / 4;
    auto median = [](std::vector<double> v) {
        std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
        return v[v.size() / 2];
    };
    const double early = median({dice.begin(), dice.begin() + static_cast<std::ptrdiff_t>(q)});
    const double late = median({dice.end() - static_cast<std::ptrdiff_t>(q), dice.end()});
    std::printf("[%s] invariant: median training Dice over the last quarter (%.4f) below the "
                "first quarter (%.4f)\n",
                late < early ? "info" : "warn", late, early);
}

// ---------------------------------------------------------------- criterion 8
void criterion_8_negative_pairs(const SmokeArtifacts& art, const DatasetIndex& index) {
    DatasetReader reader(index);
    const double frac =
        mean_negative_foreground_fraction(*art.state.model, index, reader, 0.5f);
    std::ostringstream os;
    os.precision(4);
    os << "negative pairs (neg_ratio=1 evaluation): mean predicted foreground fraction " << frac
       << " (< 0.05)";
    report(8, frac < 0.05, os.str());
}

// ---------------------------------------------------------------- criterion 9
std::string canonical_log_prefix(const std::vector<json>& log, std::size_t steps) {
    std::string out;
    std::size_t n = 0;
    for (const auto& r : log) {
        if (n >= steps) break;
        json c = r;
        c.erase("wall_ms");
        out += c.dump() + "\n";
        ++n;
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    const fs::path work =
        argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "refnet_acceptance";
    fs::remove_all(work);
    fs::create_directories(work);
    std::printf("acceptance working directory: %s\n", work.c_str());

    criterion_1_morphology();
    criterion_2_loss_identities();
    criterion_3_gradient_checks();
    criterion_4_metric_oracle();

    // default synthetic config: 64x64, 3 target categories, K=10, disjoint
    // 3-category open-source set
    const AppConfig app = default_app_config();
    const DatasetIndex index = build_splits(app.data, (work / "data").string(), 424242);

    const TrainConfig smoke_cfg = smoke_train_config();
    std::printf("running smoke A (%d iterations)...\n", smoke_cfg.max_iterations);
    SmokeArtifacts smoke_a = run_smoke(index, work / "smoke_a", smoke_cfg);

    criterion_5_alternation(smoke_a, smoke_cfg.n_critic);
    criterion_6_smoke(smoke_a);

    // criterion 7: ablation direction on the same seed
    {
        TrainConfig no_dice = smoke_cfg;
        no_dice.toggles.dice_supervision = false;
        std::printf("running ablation R-dice...\n");
        SmokeArtifacts dice_off = run_smoke(index, work / "ablate_dice", no_dice);

        TrainConfig no_disc = smoke_cfg;
        no_disc.toggles.inner_critic = false;
        no_disc.toggles.outer_critic = false;
        std::printf("running ablation R-disc...\n");
        SmokeArtifacts disc_off = run_smoke(index, work / "ablate_disc", no_disc);

        const double full = smoke_a.report.metrics.mean_iou;
        const double m_dice = dice_off.report.metrics.mean_iou;
        const double m_disc = disc_off.report.metrics.mean_iou;
        const bool ok = full >= m_dice && full >= m_disc && m_dice <= m_disc && m_dice <= full;
        std::ostringstream os;
        os.precision(4);
        os << "ablation direction: full MIoU " << full << " >= R-disc " << m_disc
           << " and >= R-dice " << m_dice << "; R-dice is the weakest";
        report(7, ok, os.str());
    }

    criterion_8_negative_pairs(smoke_a, index);

    // criterion 9: full determinism across two smoke runs
    {
        std::printf("running smoke B (determinism)...\n");
        SmokeArtifacts smoke_b = run_smoke(index, work / "smoke_b", smoke_cfg);
        const bool logs_equal =
            canonical_log_prefix(smoke_a.log, 100) == canonical_log_prefix(smoke_b.log, 100);
        const bool reports_equal = smoke_a.report.to_text() == smoke_b.report.to_text();
        const bool params_equal = smoke_a.final_seg_checksum == smoke_b.final_seg_checksum;
        report(9, logs_equal && reports_equal && params_equal,
               std::string("determinism: identical loss logs for the first 100 steps (") +
                   (logs_equal ? "yes" : "no") + "), identical final metric reports (" +
                   (reports_equal ? "yes" : "no") + "), identical final parameters (" +
                   (params_equal ? "yes" : "no") + ")");
    }

    std::printf("%d criterion(s) failed\n", g_failures);
    return g_failures;
}
