#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "refnet/image_io.hpp"
#include "refnet/scene_gen.hpp"

namespace fs = std::filesystem;
using namespace refnet;

namespace {

std::string cli() {
#ifdef REFNET_CLI_PATH
    return REFNET_CLI_PATH;
#else
    return "refnet";
#endif
}

struct RunResult {
    int code = -1;
    std::string out;
};

RunResult run(const std::string& args) {
    const fs::path tmp = fs::temp_directory_path() / "refnet_cli_out.txt";
    const std::string cmd = cli() + " " + args + " > " + tmp.string() + " 2>&1";
    const int raw = std::system(cmd.c_str());
    RunResult r;
    r.code = WEXITSTATUS(raw);
    std::ifstream in(tmp);
    r.out.assign((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return r;
}

fs::path temp_dir(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("refnet_cli_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// tiny config so CLI runs stay fast
const char* kTinyConfig = R"({
  "data": {"height": 32, "width": 32,
           "target_categories": ["circle", "square"],
           "open_categories": ["cross", "star"],
           "target_count": 10, "open_count": 8, "heldout_count": 5, "k_references": 3},
  "train": {"max_iterations": 2, "batch": 3, "checkpoint_every": 0,
            "arch": {"depth": 2, "base_width": 8},
            "critic": {"base_width": 8, "num_layers": 3}}
})";

const fs::path& tiny_setup() {
    static fs::path root = [] {
        fs::path r = temp_dir("setup");
        std::ofstream(r / "config.json") << kTinyConfig;
        RunResult g = run("gen-data --config " + (r / "config.json").string() + " --out " +
                          (r / "data").string() + " --seed 3");
        REQUIRE(g.code == 0);
        RunResult t = run("train --config " + (r / "config.json").string() + " --data " +
                          (r / "data").string() + " --out " + (r / "run").string() + " --seed 5");
        REQUIRE(t.code == 0);
        return r;
    }();
    return root;
}

} // namespace

TEST_CASE("usage errors exit with code 2") {
    CHECK(run("gen-data").code == 2);                       // missing --out
    CHECK(run("definitely-not-a-command").code == 2);
    CHECK(run("").code == 2);                               // subcommand required
    const RunResult bad = run("train --data x --out y --ablate bogus");
    CHECK(bad.code == 2);
    CHECK(bad.out.find("self") != std::string::npos); // lists valid toggles
    CHECK(run("--help").code == 0);
}

TEST_CASE("gen-data: determinism and category echo") {
    const fs::path dir = temp_dir("gen");
    std::ofstream(dir / "config.json") << kTinyConfig;
    const std::string base = "gen-data --config " + (dir / "config.json").string();
    CHECK(run(base + " --out " + (dir / "a").string() + " --seed 7").code == 0);
    CHECK(run(base + " --out " + (dir / "b").string() + " --seed 7").code == 0);
    CHECK(read_file(dir / "a" / "index.jsonl") == read_file(dir / "b" / "index.jsonl"));

    // default config: 3 target + 3 disjoint open-source categories announced
    const RunResult def = run("gen-data --out " + (dir / "full").string() + " --seed 1");
    CHECK(def.code == 0);
    CHECK(def.out.find("circle, square, triangle") != std::string::npos);
    CHECK(def.out.find("cross, star, ring") != std::string::npos);

    // unwritable path -> runtime failure, message on the error stream
    CHECK(run("gen-data --out /proc/refnet_nope --seed 1").code == 1);
}

TEST_CASE("train writes checkpoint, logs, config echo; ablation toggles apply") {
    const fs::path& root = tiny_setup();
    CHECK(fs::exists(root / "run" / "checkpoint.ckpt"));
    CHECK(fs::exists(root / "run" / "train_log.jsonl"));
    CHECK(fs::exists(root / "run" / "config.json"));

    // --ablate self zeroes the self-supervision term in every record
    const fs::path dir = temp_dir("ablate");
    const RunResult t = run("train --config " + (root / "config.json").string() + " --data " +
                            (root / "data").string() + " --out " + dir.string() +
                            " --seed 5 --ablate self --iterations 1");
    CHECK(t.code == 0);
    std::ifstream log(dir / "train_log.jsonl");
    std::string line;
    bool saw_seg = false;
    while (std::getline(log, line)) {
        if (line.find("\"segmenter\"") == std::string::npos) continue;
        saw_seg = true;
        CHECK(line.find("\"L_sel\":0.0") != std::string::npos);
    }
    CHECK(saw_seg);
}

TEST_CASE("train --k 1 restricts references") {
    const fs::path& root = tiny_setup();
    const fs::path dir = temp_dir("k1");
    const RunResult t = run("train --config " + (root / "config.json").string() + " --data " +
                            (root / "data").string() + " --out " + dir.string() +
                            " --seed 5 --k 1 --iterations 1");
    CHECK(t.code == 0);
}

TEST_CASE("eval: oracle stub reports all ones; reports are deterministic") {
    const fs::path& root = tiny_setup();
    const fs::path dir = temp_dir("eval");
    const std::string base = "eval --data " + (root / "data").string();

    const RunResult oracle = run(base + " --oracle-stub --report " + (dir / "o.txt").string());
    CHECK(oracle.code == 0);
    CHECK(oracle.out.find("PA=1.000000 MPA=1.000000 MIoU=1.000000 FWIoU=1.000000") !=
          std::string::npos);

    const std::string with_ckpt =
        base + " --checkpoint " + (root / "run" / "checkpoint.ckpt").string();
    CHECK(run(with_ckpt + " --report " + (dir / "r1.txt").string()).code == 0);
    CHECK(run(with_ckpt + " --report " + (dir / "r2.txt").string()).code == 0);
    const std::string r1 = read_file(dir / "r1.txt");
    CHECK(r1 == read_file(dir / "r2.txt"));
    CHECK(r1.find("overall:") != std::string::npos);
    CHECK(r1.find("category circle:") != std::string::npos);

    // architecture mismatch diagnostic names both descriptors
    const fs::path bad_cfg = dir / "bad.json";
    std::ofstream(bad_cfg) << R"({"train": {"arch": {"depth": 3, "base_width": 16}}})";
    const RunResult mm = run(with_ckpt + " --config " + bad_cfg.string());
    CHECK(mm.code == 1);
    CHECK(mm.out.find("architecture mismatch") != std::string::npos);
    CHECK(mm.out.find("depth=2") != std::string::npos);
    CHECK(mm.out.find("depth=3") != std::string::npos);
}

TEST_CASE("predict: shape preserved, deterministic, pad warning on odd sizes") {
    const fs::path& root = tiny_setup();
    const fs::path dir = temp_dir("predict");

    // target image straight from the dataset (32x32, divisible by stride 4)
    const fs::path img = root / "data" / "images" / "heldout_0000.ppm";
    const fs::path ref_img = root / "data" / "images" / "reference_circle_000.ppm";
    const fs::path ref_mask = root / "data" / "masks" / "circle" / "reference_circle_000.pgm";
    const std::string base = "predict --checkpoint " + (root / "run" / "checkpoint.ckpt").string() +
                             " --image " + img.string() + " --reference-image " +
                             ref_img.string() + " --reference-mask " + ref_mask.string();

    CHECK(run(base + " --out " + (dir / "m1.pgm").string() + " --soft " +
              (dir / "s1.pgm").string())
              .code == 0);
    CHECK(run(base + " --out " + (dir / "m2.pgm").string()).code == 0);
    CHECK(read_file(dir / "m1.pgm") == read_file(dir / "m2.pgm")); // byte-identical

    const BinaryMask m = read_pgm_binary((dir / "m1.pgm").string());
    CHECK(m.height == 32);
    CHECK(m.width == 32);
    const SoftMask sm = read_pgm16((dir / "s1.pgm").string());
    CHECK(sm.height == 32);

    // odd-sized input: pad-reflect, warn, and crop back to the input size
    Image odd(30, 29, 3, 0.4f);
    write_ppm((dir / "odd.ppm").string(), odd);
    Image odd_ref(30, 29, 3, 0.6f);
    write_ppm((dir / "odd_ref.ppm").string(), odd_ref);
    BinaryMask odd_mask(30, 29, 1);
    write_pgm((dir / "odd_mask.pgm").string(), odd_mask);
    const RunResult pr = run("predict --checkpoint " + (root / "run" / "checkpoint.ckpt").string() +
                             " --image " + (dir / "odd.ppm").string() + " --reference-image " +
                             (dir / "odd_ref.ppm").string() + " --reference-mask " +
                             (dir / "odd_mask.pgm").string() + " --out " +
                             (dir / "odd_out.pgm").string());
    CHECK(pr.code == 0);
    CHECK(pr.out.find("warning") != std::string::npos);
    const BinaryMask mo = read_pgm_binary((dir / "odd_out.pgm").string());
    CHECK(mo.height == 30);
    CHECK(mo.width == 29);
}

TEST_CASE("resume continues the step counter and the loss log") {
    const fs::path& root = tiny_setup();
    const fs::path a = temp_dir("resume_a");
    const fs::path b = temp_dir("resume_b");
    const std::string common = "train --config " + (root / "config.json").string() + " --data " +
                               (root / "data").string() + " --seed 31 ";

    CHECK(run(common + "--out " + a.string() + " --iterations 4").code == 0);
    CHECK(run(common + "--out " + b.string() + " --iterations 2 --checkpoint-every 0").code == 0);
    CHECK(run(common + "--out " + b.string() + " --iterations 4 --resume " +
              (b / "checkpoint.ckpt").string())
              .code == 0);

    auto canonical_log = [](const fs::path& p) {
        std::ifstream in(p);
        std::string line, out;
        while (std::getline(in, line)) {
            const auto pos = line.find("\"wall_ms\"");
            if (pos != std::string::npos) {
                const auto end = line.find(',', pos);
                line.erase(pos, end - pos + 1);
            }
            out += line + "\n";
        }
        return out;
    };
    CHECK(canonical_log(a / "train_log.jsonl") == canonical_log(b / "train_log.jsonl"));
}

TEST_CASE("train --plot and eval --plot write figures") {
    const fs::path& root = tiny_setup();
    const fs::path dir = temp_dir("plots");
    const RunResult t = run("train --config " + (root / "config.json").string() + " --data " +
                            (root / "data").string() + " --out " + dir.string() +
                            " --seed 5 --iterations 1 --plot");
    CHECK(t.code == 0);
    CHECK(fs::exists(dir / "loss_curves.ppm"));

    const RunResult e = run("eval --data " + (root / "data").string() + " --checkpoint " +
                            (root / "run" / "checkpoint.ckpt").string() + " --report " +
                            (dir / "rep.txt").string() + " --plot");
    CHECK(e.code == 0);
    CHECK(fs::exists(dir / "rep.txt.iou.ppm"));
}
