#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "astroseg/astroseg.hpp"

using namespace astroseg;
namespace fs = std::filesystem;

namespace {

const std::string cli = ASTROSEG_CLI_PATH;

int run(const std::string& args) {
    std::string cmd = cli + " " + args + " > /dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

struct CliDir {
    fs::path dir;
    explicit CliDir(const std::string& name) : dir(fs::path("cli_test_tmp") / name) {
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    std::string operator/(const std::string& leaf) const { return (dir / leaf).string(); }
};

} // namespace

TEST(Cli, SynthSegmentConvertFlow) {
    CliDir d("flow");
    ASSERT_EQ(run("synth --seed 42 --blobs 10 --out " + (d / "field")), 0);
    EXPECT_TRUE(fs::exists(d / "field.fits"));
    EXPECT_TRUE(fs::exists(d / "field_truth.pgm"));

    ASSERT_EQ(run("segment " + (d / "field.fits") + " --truth " + (d / "field_truth.pgm") +
                  " --out-dir " + (d / "seg")),
              0);
    for (const char* name : {"01_log.pgm", "02_eroded.pgm", "03_smoothed.pgm", "04_mask.pgm",
                             "trace.csv", "report.json"})
        EXPECT_TRUE(fs::exists(fs::path(d / "seg") / name)) << name;

    ASSERT_EQ(run("convert " + (d / "field.fits") + " --pgm " + (d / "field.pgm")), 0);
    Image img = read_pgm(read_file(d / "field.pgm"));
    EXPECT_EQ(img.width, 256);
    EXPECT_EQ(img.height, 256);
}

TEST(Cli, LocalModeProducesMaskWithoutTrace) {
    CliDir d("local");
    ASSERT_EQ(run("synth --seed 43 --out " + (d / "field")), 0);
    ASSERT_EQ(run("segment " + (d / "field.fits") + " --mode local --window 21 --bias -0.05" +
                  " --out-dir " + (d / "seg")),
              0);
    EXPECT_TRUE(fs::exists(fs::path(d / "seg") / "04_mask.pgm"));
    EXPECT_FALSE(fs::exists(fs::path(d / "seg") / "trace.csv"));
}

TEST(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(run("segment"), 2);             // missing positional
    EXPECT_EQ(run("frobnicate"), 2);          // unknown subcommand
    EXPECT_EQ(run("segment x.fits --mode=purple"), 2);
    CliDir d("usage");
    ASSERT_EQ(run("synth --seed 44 --out " + (d / "f")), 0);
    EXPECT_EQ(run("segment " + (d / "f.fits") + " --log-c 0"), 2); // violates a precondition
}

TEST(Cli, InputFormatErrorsExitThree) {
    CliDir d("badinput");
    EXPECT_EQ(run("segment " + (d / "missing.fits")), 3);

    std::ofstream(d / "junk.fits", std::ios::binary) << std::string(2880, 'x');
    EXPECT_EQ(run("segment " + (d / "junk.fits")), 3);

    ASSERT_EQ(run("synth --seed 45 --out " + (d / "f")), 0);
    std::ofstream(d / "bad_model.json") << "{ not json";
    EXPECT_EQ(run("detect " + (d / "f.fits") + " --model " + (d / "bad_model.json")), 3);
}

TEST(Cli, StrictNonConvergenceExitsFour) {
    CliDir d("strict");
    ASSERT_EQ(run("synth --seed 46 --out " + (d / "f")), 0);
    EXPECT_EQ(run("segment " + (d / "f.fits") + " --strict --max-iter 1 --epsilon 1e-12 --out-dir " +
                  (d / "seg")),
              4);
}

TEST(Cli, TrainRefusesTinyCsvWithExitThree) {
    CliDir d("tinycsv");
    std::ofstream csv(d / "tiny.csv");
    for (int i = 0; i < 9; ++i)
        csv << "0.1,0.2,0.3,0.4,0.5,0.6,0.7," << (i % 2) << "\n";
    csv.close();
    EXPECT_EQ(run("train " + (d / "tiny.csv") + " --out-dir " + (d / "out")), 3);
}

TEST(Cli, TrainOnCsvIsDeterministic) {
    CliDir d("traincsv");
    {
        std::ofstream csv(d / "data.csv");
        std::mt19937_64 rng(47);
        for (int i = 0; i < 80; ++i) {
            double big = uniform01(rng);
            csv << big;
            for (int f = 1; f < 7; ++f)
                csv << "," << uniform01(rng);
            csv << "," << (big > 0.5 ? 1 : 0) << "\n";
        }
    }
    std::string base = "train " + (d / "data.csv") + " --epochs 40 --seed 7 ";
    ASSERT_EQ(run(base + "--out-dir " + (d / "a") + " --model " + (d / "a_model.json")), 0);
    ASSERT_EQ(run(base + "--out-dir " + (d / "b") + " --model " + (d / "b_model.json")), 0);
    EXPECT_EQ(read_file(d / "a_model.json"), read_file(d / "b_model.json"));
    EXPECT_EQ(read_file(d / "a_model.json"), read_file(fs::path(d / "a") / "model.json"));
    EXPECT_TRUE(fs::exists(fs::path(d / "a") / "history.csv"));
    EXPECT_TRUE(fs::exists(fs::path(d / "a") / "train_report.json"));

    // the trained model drives detect end to end
    ASSERT_EQ(run("synth --seed 48 --out " + (d / "f")), 0);
    EXPECT_EQ(run("detect " + (d / "f.fits") + " --model " + (d / "a_model.json") + " --out-dir " +
                  (d / "det")),
              0);
    EXPECT_TRUE(fs::exists(fs::path(d / "det") / "report.json"));
}

TEST(Cli, ConfigFileIsReadAndCommandLineWins) {
    CliDir d("config");
    ASSERT_EQ(run("synth --seed 49 --out " + (d / "f")), 0);
    std::ofstream(d / "seg.conf") << "sigma=2.5\nerode-iters=0\n";

    // config alone == the same flags spelled out
    ASSERT_EQ(run("segment " + (d / "f.fits") + " --config " + (d / "seg.conf") + " --out-dir " +
                  (d / "from_config")),
              0);
    ASSERT_EQ(run("segment " + (d / "f.fits") + " --sigma 2.5 --erode-iters 0 --out-dir " +
                  (d / "from_flags")),
              0);
    EXPECT_EQ(read_file(fs::path(d / "from_config") / "04_mask.pgm"),
              read_file(fs::path(d / "from_flags") / "04_mask.pgm"));

    // command line overrides the file
    ASSERT_EQ(run("segment " + (d / "f.fits") + " --config " + (d / "seg.conf") +
                  " --sigma 0.5 --out-dir " + (d / "override")),
              0);
    ASSERT_EQ(run("segment " + (d / "f.fits") + " --sigma 0.5 --erode-iters 0 --out-dir " +
                  (d / "override_flags")),
              0);
    EXPECT_EQ(read_file(fs::path(d / "override") / "04_mask.pgm"),
              read_file(fs::path(d / "override_flags") / "04_mask.pgm"));
    EXPECT_NE(read_file(fs::path(d / "override") / "04_mask.pgm"),
              read_file(fs::path(d / "from_config") / "04_mask.pgm"));
}
