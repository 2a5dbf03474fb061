// End-to-end runs of the command-line binary. The path comes in through the
// STVG_CLI_PATH compile definition.

#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "stvg/evaluation.hpp"
#include "stvg/mask_db.hpp"

using namespace stvg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("stvg_cli_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const char* name) const { return (path / name).string(); }
};

int run_cli(const std::string& args) {
  const std::string cmd = std::string(STVG_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("simulate is deterministic and rerunnable") {
  TempDir tmp;
  const std::string out1 = tmp / "c1";
  const std::string out2 = tmp / "c2";
  REQUIRE(run_cli("simulate --episodes 3 --seed 7 --out " + out1) == 0);
  REQUIRE(run_cli("simulate --episodes 3 --seed 7 --out " + out2) == 0);
  for (const char* rel : {"gt.txt", "episodes.txt", "ep0000/db.txt", "ep0002/detections.txt"})
    CHECK(slurp(out1 + "/" + rel) == slurp(out2 + "/" + rel));
  // rerunning over the same directory overwrites identically
  REQUIRE(run_cli("simulate --episodes 3 --seed 7 --out " + out1) == 0);
  CHECK(slurp(out1 + "/gt.txt") == slurp(out2 + "/gt.txt"));
}

TEST_CASE("simulate fails cleanly on an empty world") {
  TempDir tmp;
  CHECK(run_cli("simulate --episodes 1 --objects-min 0 --objects-max 0 --out " + tmp / "x") == 2);
}

TEST_CASE("build-db honors the ablation flags") {
  TempDir tmp;
  const std::string dir = tmp / "sim";
  REQUIRE(run_cli("simulate --episodes 1 --seed 33 --lanes --out " + dir) == 0);
  const std::string dets = dir + "/ep0000/detections.txt";
  const std::string tracks = dir + "/ep0000/db.txt";

  REQUIRE(run_cli("build-db --detections " + dets + " --tracks " + tracks + " --out " +
                  tmp / "full.txt") == 0);
  REQUIRE(run_cli("build-db --detections " + dets + " --tracks " + tracks +
                  " --no-redetection --out " + tmp / "nore.txt") == 0);
  const MaskDatabase full = MaskDatabase::load(tmp / "full.txt");
  const MaskDatabase nore = MaskDatabase::load(tmp / "nore.txt");
  CHECK(nore.instance_ids().size() <= full.instance_ids().size());
}

TEST_CASE("build-db reports malformed detection lines") {
  TempDir tmp;
  const std::string dets = tmp / "bad.txt";
  std::ofstream out(dets, std::ios::binary);
  out << "detections-v1\n0,person,0.9,0,0,5,5\n1,person,not_a_number,0,0,5,5\n";
  out.close();
  CHECK(run_cli("build-db --detections " + dets + " --frames 4 --height 16 --width 16 --out " +
                tmp / "db.txt") == 2);
}

TEST_CASE("score and repair flow, corpus mode") {
  TempDir tmp;
  const std::string dir = tmp / "corpus";
  REQUIRE(run_cli("simulate --episodes 4 --seed 101 --out " + dir) == 0);

  // predictions straight from the episodes file: target id + truth interval
  const auto gts = load_ground_truth(dir + "/gt.txt");
  std::vector<Prediction> preds;
  std::ifstream eps(dir + "/episodes.txt");
  std::string line;
  std::getline(eps, line);
  std::size_t idx = 0;
  while (std::getline(eps, line) && idx < gts.size()) {
    const auto bar = line.find('|');
    const auto bar2 = line.find('|', bar + 1);
    const int target = std::stoi(line.substr(bar + 1, bar2 - bar - 1));
    preds.push_back({gts[idx].sample_id, gts[idx].tube.interval, target});
    ++idx;
  }
  save_predictions(tmp / "preds.txt", preds);

  REQUIRE(run_cli("score --preds " + tmp / "preds.txt" + " --gt " + dir + "/gt.txt --corpus " +
                  dir + " --out-csv " + tmp / "plain.csv" + " --out-md " + tmp / "plain.md") == 0);
  REQUIRE(run_cli("score --preds " + tmp / "preds.txt" + " --gt " + dir + "/gt.txt --corpus " +
                  dir + " --repair --out-csv " + tmp / "repair.csv") == 0);

  // repair never lowers per-sample vIoU
  const std::string plain = slurp(tmp / "plain.csv");
  const std::string repaired = slurp(tmp / "repair.csv");
  std::istringstream a(plain), b(repaired);
  std::string la, lb;
  std::getline(a, la);
  std::getline(b, lb);
  while (std::getline(a, la) && std::getline(b, lb)) {
    const auto viou_of = [](const std::string& row) {
      const auto c1 = row.find(',');
      const auto c2 = row.find(',', c1 + 1);
      const auto c3 = row.find(',', c2 + 1);
      return std::stod(row.substr(c2 + 1, c3 - c2 - 1));
    };
    CHECK(viou_of(lb) >= viou_of(la) - 1e-9);
  }

  // markdown and csv carry the same per-sample numbers
  const std::string md = slurp(tmp / "plain.md");
  std::istringstream c(plain);
  std::getline(c, la);
  while (std::getline(c, la)) {
    const auto c1 = la.find(',');
    const auto c2 = la.find(',', c1 + 1);
    const double tiou = std::stod(la.substr(c1 + 1, c2 - c1 - 1));
    char cell[32];
    std::snprintf(cell, sizeof(cell), "| %.4f |", tiou);
    CHECK(md.find(cell) != std::string::npos);
  }

  // score without any database is a usage error
  CHECK(run_cli("score --preds " + tmp / "preds.txt" + " --gt " + dir + "/gt.txt") == 1);
}

TEST_CASE("upper-bound, plan, rasterize, train-toy and report run end to end") {
  TempDir tmp;
  const std::string dir = tmp / "corpus";
  REQUIRE(run_cli("simulate --episodes 2 --seed 55 --out " + dir) == 0);
  REQUIRE(run_cli("upper-bound --gt " + dir + "/gt.txt --corpus " + dir + " --out-csv " +
                  tmp / "ub.csv") == 0);
  CHECK(slurp(tmp / "ub.csv").find("ep0000") != std::string::npos);

  REQUIRE(run_cli("plan-prompts --db " + dir + "/ep0000/db.txt --out " + tmp / "plan.txt") == 0);
  REQUIRE(run_cli("rasterize --plan " + tmp / "plan.txt" + " --out " + tmp / "frames.bin") == 0);
  CHECK(fs::file_size(tmp / "frames.bin") > 0);

  REQUIRE(run_cli("repair --db " + dir + "/ep0000/db.txt --target-id 1 --start 0 --end 4 --out " +
                  tmp / "repaired.txt") == 0);
  CHECK(MaskDatabase::load(tmp / "repaired.txt").frame_count() > 0);

  REQUIRE(run_cli("train-toy --updates 40 --pool 4 --out-curve " + tmp / "curve.csv" +
                  " --out-policy " + tmp / "policy.json") == 0);
  const std::string curve = slurp(tmp / "curve.csv");
  CHECK(curve.rfind("update,mean_reward", 0) == 0);
  CHECK(std::count(curve.begin(), curve.end(), '\n') == 41);
  REQUIRE(run_cli("train-toy --updates 40 --pool 4 --reward-variant coupled --out-curve " +
                  tmp / "curve2.csv") == 0);
  REQUIRE(run_cli("train-toy --updates 40 --pool 4 --beta 0 --out-curve " + tmp / "curve3.csv") ==
          0);

  REQUIRE(run_cli("report --in " + tmp / "ub.csv" + " --format markdown --out " + tmp / "r.md") ==
          0);
  CHECK(slurp(tmp / "r.md").find("m_tIoU") != std::string::npos);
}

TEST_CASE("print-config exposes the resolved defaults") {
  TempDir tmp;
  const std::string cfg_path = tmp / "cfg.json";
  std::ofstream cfg(cfg_path, std::ios::binary);
  cfg << R"({"identity":{"redetect_every":5},"grpo":{"kl_beta":0.1}})";
  cfg.close();

  const std::string out_path = tmp / "printed.json";
  const std::string cmd = std::string(STVG_CLI_PATH) + " --config " + cfg_path +
                          " --print-config > " + out_path + " 2>/dev/null";
  REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  const std::string printed = slurp(out_path);
  CHECK(printed.find("\"redetect_every\": 5") != std::string::npos);
  CHECK(printed.find("\"kl_beta\": 0.1") != std::string::npos);
  CHECK(printed.find("\"detector_confidence\": 0.25") != std::string::npos);
  CHECK(printed.find("\"font_size\": 20.0") != std::string::npos);

  // a typo in the config file is a config error
  std::ofstream bad(cfg_path, std::ios::binary);
  bad << R"({"identity":{"redetect_evry":5}})";
  bad.close();
  CHECK(run_cli("--config " + cfg_path + " --print-config") == 1);
}
